"""Symmetric positive-definite matrices under the log-Euclidean metric.

The matrix logarithm maps SPD(k) isometrically onto the symmetric matrices with the Frobenius
norm, so distances, geodesics and Fréchet means are all computed on log-images. Eigenvalues come
from a cyclic Jacobi solver that runs vectorized over stacks of matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import DimensionError, DomainError, GeodesicSpace, NearSingularError, check_unit_interval

logger = logging.getLogger(__name__)

SymMatrix = np.ndarray

SYMMETRY_TOL = 1e-10
SINGULAR_TOL = 1e-13
FACTOR_SINGULAR_TOL = float(np.sqrt(np.finfo(float).tiny))
MAX_SWEEPS = 50


def _as_square_stack(m: np.ndarray) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] == 0:
        raise DimensionError(f"Expected square matrices, got shape {a.shape}.")
    return a


def sym_matrix(m: np.ndarray) -> SymMatrix:
    """Validate near-symmetry and return the exactly symmetrized copy."""
    a = _as_square_stack(m)
    if not np.all(np.isfinite(a)):
        raise DomainError("Matrix entries must be finite.")
    asym = np.abs(a - np.swapaxes(a, -1, -2))
    scale = np.maximum(1.0, np.abs(a).max(axis=(-1, -2), keepdims=True))
    if np.any(asym > SYMMETRY_TOL * scale):
        raise DomainError(f"Matrix is not symmetric (max asymmetry {asym.max():.3g}).")
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def sym_eigen(m: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition by cyclic Jacobi rotations.

    Accepts one matrix or a stack ``(..., k, k)``. Returns eigenvalues sorted descending and the
    matching orthonormal eigenvectors as columns.
    """
    a = sym_matrix(m)
    batch_shape, k = a.shape[:-2], a.shape[-1]
    a = a.reshape(-1, k, k).copy()
    v = np.broadcast_to(np.eye(k), a.shape).copy()
    scale2 = np.maximum(np.sum(a * a, axis=(1, 2)), np.finfo(float).tiny)
    off_mask = ~np.eye(k, dtype=bool)
    pairs = [(p, q) for p in range(k - 1) for q in range(p + 1, k)]

    for _ in range(max_sweeps):
        off = np.sum(a[:, off_mask] ** 2, axis=1)
        if np.all(off <= 1e-28 * scale2):
            break
        for p, q in pairs:
            apq = a[:, p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(active, (a[:, q, q] - a[:, p, p]) / (2.0 * apq), 0.0)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.hypot(t, 1.0)
            s = t * c
            cc, ss = c[:, None], s[:, None]

            ap, aq = a[:, :, p].copy(), a[:, :, q].copy()
            a[:, :, p] = cc * ap - ss * aq
            a[:, :, q] = ss * ap + cc * aq
            ap, aq = a[:, p, :].copy(), a[:, q, :].copy()
            a[:, p, :] = cc * ap - ss * aq
            a[:, q, :] = ss * ap + cc * aq
            vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
            v[:, :, p] = cc * vp - ss * vq
            v[:, :, q] = ss * vp + cc * vq
    else:
        logger.warning("Jacobi solver stopped after %d sweeps without full convergence", max_sweeps)

    values = np.diagonal(a, axis1=1, axis2=2)
    order = np.argsort(-values, axis=1, kind="stable")
    values = np.take_along_axis(values, order, axis=1)
    vectors = np.take_along_axis(v, order[:, None, :], axis=2)
    return values.reshape(*batch_shape, k), vectors.reshape(*batch_shape, k, k)


def _recompose(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    out = np.einsum("...ij,...j,...kj->...ik", vectors, values, vectors)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def matrix_log(m: np.ndarray) -> SymMatrix:
    """Matrix logarithm of one SPD matrix or a stack of them."""
    values, vectors = sym_eigen(m)
    smallest = values.min()
    if smallest <= SINGULAR_TOL:
        raise NearSingularError(f"Eigenvalue {smallest:.3g} is at or below {SINGULAR_TOL}.")
    return _recompose(np.log(values), vectors)


def matrix_exp(s: np.ndarray) -> np.ndarray:
    values, vectors = sym_eigen(s)
    return _recompose(np.exp(values), vectors)


def near_singular_factors(f: np.ndarray) -> np.ndarray:
    """Mask of factors F whose product F Fᵀ has no usable logarithm."""
    s = np.linalg.svd(_as_square_stack(f), compute_uv=False)
    return np.asarray(~(s.min(axis=-1) > FACTOR_SINGULAR_TOL))


def factor_log(f: np.ndarray) -> SymMatrix:
    """log(F Fᵀ) for one square factor or a stack, without forming F Fᵀ.

    The eigenvalues of F Fᵀ are the squared singular values of F, so eigenvalues far below
    machine precision of the largest one keep their relative accuracy.
    """
    u, s, _ = np.linalg.svd(_as_square_stack(f))
    smallest = float(np.min(s))
    if not smallest > FACTOR_SINGULAR_TOL:
        raise NearSingularError(f"Factor singular value {smallest:.3g} is at or below {FACTOR_SINGULAR_TOL:.3g}.")
    return _recompose(2.0 * np.log(s), u)


@dataclass(frozen=True, eq=False)
class SpdPoint:
    """An SPD matrix, stored by its log-image."""

    log: SymMatrix

    def __post_init__(self) -> None:
        log = sym_matrix(self.log)
        if log.ndim != 2:
            raise DimensionError(f"An SPD point is a single matrix, got shape {log.shape}.")
        log.setflags(write=False)
        object.__setattr__(self, "log", log)

    @classmethod
    def from_matrix(cls, m: np.ndarray | Sequence[Sequence[float]]) -> SpdPoint:
        return cls(matrix_log(np.asarray(m, dtype=float)))

    @classmethod
    def from_log(cls, s: np.ndarray) -> SpdPoint:
        return cls(np.asarray(s, dtype=float))

    @classmethod
    def identity(cls, k: int, scale: float = 1.0) -> SpdPoint:
        if scale <= 0:
            raise DomainError(f"Scale must be positive, got {scale}.")
        return cls(np.eye(k) * np.log(scale))

    @property
    def k(self) -> int:
        return int(self.log.shape[0])

    @cached_property
    def matrix(self) -> np.ndarray:
        out = matrix_exp(self.log)
        out.setflags(write=False)
        return out

    @cached_property
    def root(self) -> np.ndarray:
        """Symmetric square root, a factor F with F Fᵀ equal to the matrix."""
        out = matrix_exp(0.5 * self.log)
        out.setflags(write=False)
        return out


def spd_log(a: SpdPoint) -> SymMatrix:
    return a.log


def spd_exp(s: SymMatrix) -> SpdPoint:
    return SpdPoint.from_log(s)


def _check_same_k(a: SpdPoint, b: SpdPoint) -> None:
    if a.k != b.k:
        raise DimensionError(f"Matrix sizes differ: {a.k} and {b.k}.")


def spd_distance(a: SpdPoint, b: SpdPoint) -> float:
    _check_same_k(a, b)
    return float(np.linalg.norm(a.log - b.log))


def spd_interpolate(a: SpdPoint, b: SpdPoint, t: float) -> SpdPoint:
    check_unit_interval(t)
    _check_same_k(a, b)
    return SpdPoint((1.0 - t) * a.log + t * b.log)


def spd_frechet_mean(data: Sequence[SpdPoint], weights: Sequence[float] | None = None) -> SpdPoint:
    if not data:
        raise DomainError("Cannot average an empty point set.")
    for point in data[1:]:
        _check_same_k(data[0], point)
    logs = np.stack([p.log for p in data])
    return SpdPoint(np.average(logs, axis=0, weights=weights))


@dataclass(frozen=True)
class SpdSpace(GeodesicSpace[SpdPoint]):
    k: int = 3
    name: str = "spd"
    is_flat = True

    def distance(self, x: SpdPoint, y: SpdPoint) -> float:
        return spd_distance(x, y)

    def interpolate(self, x: SpdPoint, y: SpdPoint, t: float) -> SpdPoint:
        return spd_interpolate(x, y, t)

    def frechet_mean(self, points: Sequence[SpdPoint], weights: Sequence[float] | None = None) -> SpdPoint:
        return spd_frechet_mean(points, weights)
