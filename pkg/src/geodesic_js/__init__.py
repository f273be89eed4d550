"""Geodesic James-Stein shrinkage on Hadamard spaces."""
