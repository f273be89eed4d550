"""Euclidean space with the classical James-Stein formulas, and the circle (not Hadamard)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DimensionError, DomainError, GeodesicSpace, check_unit_interval

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class EuclideanPoint:
    coords: np.ndarray

    def __post_init__(self) -> None:
        coords = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if coords.ndim != 1 or coords.size == 0:
            raise DimensionError(f"Euclidean points are nonempty vectors, got shape {coords.shape}.")
        if not np.all(np.isfinite(coords)):
            raise DomainError("Euclidean coordinates must be finite.")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, *values: float) -> EuclideanPoint:
        return cls(np.array(values, dtype=float))

    @property
    def dim(self) -> int:
        return int(self.coords.size)


@dataclass(frozen=True)
class EuclideanSpace(GeodesicSpace[EuclideanPoint]):
    dim: int = 1
    name: str = "euclidean"
    is_flat = True

    def _check(self, *points: EuclideanPoint) -> None:
        for point in points:
            if point.dim != self.dim:
                raise DimensionError(f"Expected dimension {self.dim}, got {point.dim}.")

    def distance(self, x: EuclideanPoint, y: EuclideanPoint) -> float:
        self._check(x, y)
        return float(np.linalg.norm(x.coords - y.coords))

    def interpolate(self, x: EuclideanPoint, y: EuclideanPoint, t: float) -> EuclideanPoint:
        check_unit_interval(t)
        self._check(x, y)
        return EuclideanPoint((1.0 - t) * x.coords + t * y.coords)

    def frechet_mean(
        self, points: Sequence[EuclideanPoint], weights: Sequence[float] | None = None
    ) -> EuclideanPoint:
        if not points:
            raise DomainError("Cannot average an empty point set.")
        self._check(*points)
        stacked = np.stack([p.coords for p in points])
        return EuclideanPoint(np.average(stacked, axis=0, weights=weights))


@dataclass(frozen=True)
class EuclideanShrinkage:
    point: EuclideanPoint
    factor: float
    degenerate: bool = False


def _stein_factor(x: EuclideanPoint, psi: EuclideanPoint, sigma2: float) -> tuple[float, bool]:
    if x.dim != psi.dim:
        raise DimensionError(f"Dimensions differ: {x.dim} and {psi.dim}.")
    if x.dim < 3:
        raise DimensionError("Classical James-Stein needs at least three coordinates.")
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be nonnegative, got {sigma2}.")
    gap2 = float(np.sum((x.coords - psi.coords) ** 2))
    if gap2 == 0.0:
        logger.debug("James-Stein at X = psi; returning psi")
        return 1.0, True
    return sigma2 * (x.dim - 2) / gap2, False


def classical_js(x: EuclideanPoint, psi: EuclideanPoint, sigma2: float) -> EuclideanShrinkage:
    """psi * s + (1 - s) * X with s = sigma2 (n - 2) / |X - psi|^2, unclamped."""
    factor, degenerate = _stein_factor(x, psi, sigma2)
    if degenerate:
        return EuclideanShrinkage(psi, factor, True)
    return EuclideanShrinkage(EuclideanPoint(factor * psi.coords + (1.0 - factor) * x.coords), factor)


def positive_part_js(x: EuclideanPoint, psi: EuclideanPoint, sigma2: float) -> EuclideanShrinkage:
    factor, degenerate = _stein_factor(x, psi, sigma2)
    factor = min(1.0, factor)
    if degenerate or factor == 1.0:
        return EuclideanShrinkage(psi, factor, degenerate)
    return EuclideanShrinkage(EuclideanPoint(factor * psi.coords + (1.0 - factor) * x.coords), factor)


@dataclass(frozen=True)
class CirclePoint:
    angle: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.angle):
            raise DomainError("Circle angles must be finite.")
        angle = math.fmod(float(self.angle), TWO_PI)
        if angle < 0:
            angle += TWO_PI
        # fmod of a tiny negative can round up to exactly 2*pi
        object.__setattr__(self, "angle", 0.0 if angle >= TWO_PI else angle)


def _signed_arc(a: float, b: float) -> float:
    return (b - a + math.pi) % TWO_PI - math.pi


def circle_distance(a: CirclePoint, b: CirclePoint) -> float:
    gap = abs(a.angle - b.angle)
    return min(gap, TWO_PI - gap)


def circle_interpolate(a: CirclePoint, b: CirclePoint, t: float) -> tuple[CirclePoint, bool]:
    """Move a fraction ``t`` along the shorter arc; antipodal inputs go counterclockwise.

    Returns the point and whether the antipodal tie-break was used.
    """
    check_unit_interval(t)
    arc = _signed_arc(a.angle, b.angle)
    antipodal = math.isclose(abs(arc), math.pi, rel_tol=0.0, abs_tol=1e-12)
    if antipodal:
        logger.debug("Antipodal circle geodesic; going counterclockwise")
        arc = math.pi
    return CirclePoint(a.angle + t * arc), antipodal


def circle_distances(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    gap = np.abs(np.mod(np.asarray(a, dtype=float) - b, TWO_PI))
    return np.minimum(gap, TWO_PI - gap)


def circle_shrink(angles: np.ndarray, target: float, weights: np.ndarray | float) -> np.ndarray:
    """Vectorized ``circle_interpolate`` from each angle toward ``target``."""
    angles = np.asarray(angles, dtype=float)
    arc = np.mod(target - angles + math.pi, TWO_PI) - math.pi
    arc = np.where(np.isclose(np.abs(arc), math.pi, rtol=0.0, atol=1e-12), math.pi, arc)
    return np.mod(angles + weights * arc, TWO_PI)


@dataclass(frozen=True)
class CircleSpace(GeodesicSpace[CirclePoint]):
    name: str = "circle"
    is_hadamard = False

    def distance(self, x: CirclePoint, y: CirclePoint) -> float:
        return circle_distance(x, y)

    def interpolate(self, x: CirclePoint, y: CirclePoint, t: float) -> CirclePoint:
        point, _ = circle_interpolate(x, y, t)
        return point
