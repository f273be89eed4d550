"""Geodesic James-Stein estimators on product Hadamard spaces."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence, Union

import numpy as np

from .geometry.core import DomainError, GeometryError, ProductPoint, ProductSpace

logger = logging.getLogger(__name__)


class EstimatorError(GeometryError):
    pass


@dataclass(frozen=True)
class FixedPoint:
    """Shrink toward ``psi``: one point replicated into every group, or a full ProductPoint."""

    psi: Any


@dataclass(frozen=True)
class AdaptiveSampleMean:
    pass


@dataclass(frozen=True)
class OracleMu:
    mu: Any


ShrinkPoint = Union[FixedPoint, AdaptiveSampleMean, OracleMu]


@dataclass(frozen=True)
class JamesStein:
    pass


@dataclass(frozen=True)
class ScaledJamesStein:
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise EstimatorError(f"Scale alpha must lie in (0, 1], got {self.alpha}.")


@dataclass(frozen=True)
class LowerBoundWeight:
    alpha0: float

    def __post_init__(self) -> None:
        if not self.alpha0 > 0.0:
            raise EstimatorError(f"Variance lower bound must be positive, got {self.alpha0}.")


@dataclass(frozen=True)
class FixedWeight:
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise EstimatorError(f"Fixed weight must lie in [0, 1], got {self.t}.")


WeightMode = Union[JamesStein, ScaledJamesStein, LowerBoundWeight, FixedWeight]


@dataclass(frozen=True)
class ShrinkageSpec:
    """``sigma2`` is one Fréchet variance shared by all groups or one per group."""

    sigma2: float | tuple[float, ...] | None
    shrink_point: ShrinkPoint
    weight: WeightMode = JamesStein()

    def __post_init__(self) -> None:
        values = self.sigma2 if isinstance(self.sigma2, tuple) else (self.sigma2,)
        if self.sigma2 is None:
            if isinstance(self.weight, (JamesStein, ScaledJamesStein)):
                raise EstimatorError("James-Stein weights need sigma2; use LowerBoundWeight or FixedWeight.")
        elif any(v is None or v < 0 or math.isnan(v) for v in values):
            raise EstimatorError(f"Group variances must be nonnegative, got {self.sigma2}.")

    def total_sigma2(self, n: int) -> float:
        if self.sigma2 is None:
            return 0.0
        if isinstance(self.sigma2, tuple):
            if len(self.sigma2) != n:
                raise EstimatorError(f"{len(self.sigma2)} group variances for {n} groups.")
            return math.fsum(self.sigma2)
        return n * float(self.sigma2)


@dataclass(frozen=True)
class ShrinkageEstimate:
    points: ProductPoint
    weight_applied: float
    dist2: float
    sigma2: float
    shrink_point: ProductPoint


def js_weight(sigma2: float, dist2: float) -> float:
    """1 ∧ sigma2 / dist2, with full shrinkage when dist2 is zero."""
    if sigma2 < 0 or dist2 < 0:
        raise DomainError(f"Weight inputs must be nonnegative, got sigma2={sigma2}, dist2={dist2}.")
    if dist2 == 0.0:
        return 1.0
    return min(1.0, sigma2 / dist2)


def alpha_scaled_weight(alpha0: float, dist2: float) -> float:
    if alpha0 <= 0:
        raise DomainError(f"alpha0 must be positive, got {alpha0}.")
    return js_weight(alpha0, dist2)


@dataclass(frozen=True)
class OracleWeight:
    weight: float
    degenerate: bool = False


def oracle_weight(sigma2: float, rho_x_psi2: float, rho_t_psi2: float) -> OracleWeight:
    """Minimizer of the CAT(0) risk bound, clamped to [0, 1].

    With frequentist inputs rho_t_psi2 = d(theta, psi)^2 for a fixed theta; with Bayes inputs
    both second moments are averaged over the prior.
    """
    if sigma2 < 0 or rho_x_psi2 < 0 or rho_t_psi2 < 0:
        raise DomainError("Oracle weight inputs must be nonnegative.")
    if rho_x_psi2 == 0.0:
        logger.debug("Oracle weight with rho(X, psi)^2 = 0; using full shrinkage")
        return OracleWeight(1.0, True)
    raw = (sigma2 + rho_x_psi2 - rho_t_psi2) / (2.0 * rho_x_psi2)
    return OracleWeight(min(1.0, max(0.0, raw)))


def approximate_risk_bound(sigma2: float, rho_theta_psi2: float) -> float:
    """sigma2 * rho / (sigma2 + rho): the large-n risk ceiling of the James-Stein estimator."""
    if sigma2 < 0 or rho_theta_psi2 < 0:
        raise DomainError("Risk bound inputs must be nonnegative.")
    total = sigma2 + rho_theta_psi2
    return 0.0 if total == 0.0 else sigma2 * rho_theta_psi2 / total


def adaptive_shrink_point(space: ProductSpace, x: ProductPoint) -> Any:
    """Sample Fréchet mean of the groups; needs every group in the same space."""
    if not space.homogeneous:
        raise DomainError("The sample-mean shrinkage point needs identical group spaces.")
    return space.spaces[0].frechet_mean(list(x.components))


def resolve_shrink_point(space: ProductSpace, x: ProductPoint, mode: ShrinkPoint) -> ProductPoint:
    if isinstance(mode, AdaptiveSampleMean):
        return ProductPoint((adaptive_shrink_point(space, x),) * space.n)
    target = mode.psi if isinstance(mode, FixedPoint) else mode.mu
    if isinstance(target, ProductPoint):
        return target
    return ProductPoint((target,) * space.n)


def shrinkage_weight(mode: WeightMode, total_sigma2: float, total_dist2: float, n: int) -> float:
    if isinstance(mode, JamesStein):
        return js_weight(total_sigma2, total_dist2)
    if isinstance(mode, ScaledJamesStein):
        return mode.alpha * js_weight(total_sigma2, total_dist2)
    if isinstance(mode, LowerBoundWeight):
        return alpha_scaled_weight(n * mode.alpha0, total_dist2)
    if isinstance(mode, FixedWeight):
        return mode.t
    raise EstimatorError(f"Unknown weight mode {mode!r}.")


def geodesic_js(space: ProductSpace, x: ProductPoint, spec: ShrinkageSpec) -> ShrinkageEstimate:
    """Move every group a common fraction w of the way from X toward psi.

    The James-Stein weight is sum(sigma_i^2) / sum(d_i(X_i, psi_i)^2) clamped at 1, which equals
    sigma2 / d(X, psi)^2 in the averaged product metric.
    """
    psi = resolve_shrink_point(space, x, spec.shrink_point)
    total_dist2 = math.fsum(space.squared_distances(x, psi))
    total_sigma2 = spec.total_sigma2(space.n)
    weight = shrinkage_weight(spec.weight, total_sigma2, total_dist2, space.n)
    points = space.interpolate(x, psi, weight)
    return ShrinkageEstimate(
        points=points,
        weight_applied=weight,
        dist2=total_dist2 / space.n,
        sigma2=total_sigma2 / space.n,
        shrink_point=psi,
    )


@dataclass(frozen=True)
class LossBound:
    bound: float
    a: float | None = None
    b: float | None = None
    c: float | None = None


def loss_bound(
    space: ProductSpace,
    theta: ProductPoint,
    x: ProductPoint,
    psi: ProductPoint,
    weight: float,
    sigma2: float | None = None,
) -> LossBound:
    """CAT(0) upper bound on d(theta, [X, psi]_w)^2.

    With ``sigma2`` the bound is also split into the terms (a) shrinking inside A = {w < 1},
    (b) the bias paid inside A and (c) the full-shrink loss on the complement of A. The split is
    exact for the James-Stein weight.
    """
    d_xt = space.distance(x, theta) ** 2
    d_tp = space.distance(theta, psi) ** 2
    d_xp = space.distance(x, psi) ** 2
    bound = (1.0 - weight) * d_xt + weight * d_tp - weight * (1.0 - weight) * d_xp
    if sigma2 is None:
        return LossBound(bound)
    if weight < 1.0:
        return LossBound(bound, a=(1.0 - weight) * (d_xt - sigma2), b=weight * d_tp, c=0.0)
    return LossBound(bound, a=0.0, b=0.0, c=d_tp)


@dataclass(frozen=True, eq=False)
class FlatShrinkage:
    coords: np.ndarray
    weights: np.ndarray


def flat_geodesic_js(
    x_coords: np.ndarray, psi_coords: np.ndarray, sigma2: float | Sequence[float] | np.ndarray
) -> FlatShrinkage:
    """James-Stein in Hilbert coordinates for a batch of replicates.

    ``x_coords`` has shape ``(..., n, d)``; ``psi_coords`` broadcasts against it; ``sigma2`` is one
    value per group (shape ``(n,)`` or scalar).
    """
    x = np.asarray(x_coords, dtype=float)
    if x.ndim < 2:
        raise DomainError(f"Expected coordinates of shape (..., n, d), got {x.shape}.")
    n = x.shape[-2]
    gap = np.broadcast_to(np.asarray(psi_coords, dtype=float), x.shape) - x
    total_dist2 = np.sum(gap**2, axis=(-2, -1))
    group_sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (n,))
    if np.any(group_sigma2 < 0):
        raise DomainError("Group variances must be nonnegative.")
    total_sigma2 = float(group_sigma2.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(total_dist2 > 0.0, np.minimum(1.0, total_sigma2 / total_dist2), 1.0)
    return FlatShrinkage(x + weights[..., None, None] * gap, weights)
