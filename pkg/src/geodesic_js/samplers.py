"""Random streams and samplers.

Every draw comes from a ``numpy.random.Generator`` over Philox, keyed by a master seed and a
stream id, so a replicate's numbers depend only on ``(seed, stream id)`` and never on which
worker ran it.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .geometry.core import DomainError, NearSingularError
from .geometry.spd import SpdPoint, factor_log, near_singular_factors
from .geometry.tree import TreeWord

logger = logging.getLogger(__name__)

CHI2_NORMAL_SUM_MAX_DF = 340
MIN_ORACLE_DRAWS = 10_000
ORACLE_CHUNK = 20_000


def tag_key(tag: str) -> int:
    """Stable 64-bit key for an experiment tag."""
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, *keys: int | str) -> RngStream:
        resolved = tuple(tag_key(k) if isinstance(k, str) else int(k) for k in keys)
        return RngStream(self.seed, self.stream_id + resolved)


def sample_gaussian(dim: int, mean: np.ndarray | float, sd: float, rng: np.random.Generator) -> np.ndarray:
    if dim < 1:
        raise DomainError(f"Dimension must be positive, got {dim}.")
    if sd < 0:
        raise DomainError(f"Standard deviation must be nonnegative, got {sd}.")
    center = np.broadcast_to(np.asarray(mean, dtype=float), (dim,))
    return center + sd * rng.standard_normal(dim)


def _chi2(dof: int, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if dof <= CHI2_NORMAL_SUM_MAX_DF:
        return np.sum(rng.standard_normal(shape + (dof,)) ** 2, axis=-1)
    return 2.0 * rng.gamma(dof / 2.0, size=shape)


def _bartlett(k: int, df: int, batch: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    a = np.zeros(batch + (k, k))
    for i in range(k):
        a[..., i, i] = np.sqrt(_chi2(df - i, batch, rng))
    rows, cols = np.tril_indices(k, -1)
    if rows.size:
        a[..., rows, cols] = rng.standard_normal(batch + (rows.size,))
    return a


def wishart_factors(factor: np.ndarray, df: int, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Factors F A of Wishart draws W = F A Aᵀ Fᵀ for a scale matrix F Fᵀ.

    ``factor`` is one matrix or a stack; the output has shape ``size + factor.shape``. Any factor
    of the scale works since A Aᵀ is orthogonally invariant.
    """
    factor = np.asarray(factor, dtype=float)
    k = factor.shape[-1]
    if df < k:
        raise DomainError(f"Wishart degrees of freedom {df} below dimension {k}.")
    return factor @ _bartlett(k, df, tuple(size) + factor.shape[:-2], rng)


def sample_wishart_matrices(
    scale: np.ndarray, df: int, size: tuple[int, ...], rng: np.random.Generator
) -> np.ndarray:
    """Bartlett-decomposition Wishart draws as raw matrices.

    ``scale`` is one matrix or a stack; the output has shape ``size + scale.shape``.
    """
    scale = np.asarray(scale, dtype=float)
    k = scale.shape[-1]
    if df < k:
        raise DomainError(f"Wishart degrees of freedom {df} below dimension {k}.")
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError as exc:
        raise DomainError("Wishart scale matrix is not positive definite.") from exc
    la = wishart_factors(chol, df, size, rng)
    w = la @ np.swapaxes(la, -1, -2)
    return 0.5 * (w + np.swapaxes(w, -1, -2))


def wishart_logs(factor: np.ndarray, df: int, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Log-images of Wishart draws with scale ``factor @ factor.T``.

    Draws whose factor is numerically singular are replaced by fresh draws from the same stream.
    """
    if np.any(near_singular_factors(factor)):
        raise NearSingularError("Wishart scale factor is numerically singular.")
    draws = wishart_factors(factor, df, size, rng)
    bad = near_singular_factors(draws)
    redrawn = 0
    while np.any(bad):
        redrawn += int(bad.sum())
        fresh = wishart_factors(factor, df, size, rng)
        draws = np.where(bad[..., None, None], fresh, draws)
        bad = near_singular_factors(draws)
    if redrawn:
        logger.warning("Redrew %d numerically singular Wishart draws (df=%d)", redrawn, df)
    return factor_log(draws)


def sample_wishart(scale: SpdPoint, df: int, rng: np.random.Generator) -> SpdPoint:
    return SpdPoint.from_log(wishart_logs(scale.root, df, (), rng))


def lazy_walk_3regular(start: TreeWord, steps: int, rng: np.random.Generator) -> TreeWord:
    """Lazy walk: stay with probability 1/4, else move to one of the three neighbours."""
    if steps < 0:
        raise DomainError(f"Steps must be nonnegative, got {steps}.")
    word = list(start)
    for move in rng.integers(0, 4, size=steps).tolist():
        if move == 0:
            continue
        if not word:
            word.append(move - 1)
        elif move == 1:
            word.pop()
        else:
            word.append(move - 2)
    return tuple(word)


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    probs: np.ndarray
    steps: int

    def mean(self) -> float:
        return float(np.dot(self.probs, np.arange(self.probs.size)))

    def second_moment(self) -> float:
        d = np.arange(self.probs.size, dtype=float)
        return float(np.dot(self.probs, d * d))


def walk_distance_distribution(steps: int) -> DistanceDistribution:
    """Exact law of the lazy walk's distance from its start after ``steps`` steps."""
    if steps < 0:
        raise DomainError(f"Steps must be nonnegative, got {steps}.")
    probs = np.zeros(steps + 1)
    probs[0] = 1.0
    for _ in range(steps):
        away = probs[1:]
        nxt = np.zeros_like(probs)
        nxt[0] = 0.25 * probs[0]
        nxt[1] = 0.75 * probs[0]
        nxt[:-1] += 0.25 * away
        nxt[1:] += 0.25 * away
        nxt[2:] += 0.5 * away[:-1]
        probs = nxt
    return DistanceDistribution(probs, steps)


@dataclass(frozen=True)
class ConditionalMoments:
    theta: SpdPoint
    sigma2: float
    theta_se: float
    sigma2_se: float


def conditional_draws(psi: np.ndarray, alpha: int, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Log-images of X with ``(k + alpha) X | psi ~ Wishart(psi, k + alpha)``.

    ``psi`` is a factor F of the scale matrix F Fᵀ, or a stack of them; the output has shape
    ``size + psi.shape``.
    """
    k = psi.shape[-1]
    df = k + alpha
    return wishart_logs(psi, df, size, rng) - np.log(df) * np.eye(k)


def _conditional_logs(psi: np.ndarray, alpha: int, draws: int, rng: np.random.Generator) -> np.ndarray:
    chunks = []
    remaining = draws
    while remaining > 0:
        size = min(remaining, ORACLE_CHUNK)
        chunks.append(conditional_draws(psi, alpha, (size,), rng))
        remaining -= size
    return np.concatenate(chunks)


def spd_conditional_moments(
    psi: SpdPoint, alpha: int, n_oracle: int, rng: np.random.Generator
) -> ConditionalMoments:
    """Monte Carlo Fréchet mean and variance of X given psi.

    Under the log-Euclidean metric theta = exp(E log X) and sigma2 = E |log X - log theta|_F^2.
    """
    if n_oracle < MIN_ORACLE_DRAWS:
        raise DomainError(f"Oracle needs at least {MIN_ORACLE_DRAWS} draws, got {n_oracle}.")
    if alpha < 0:
        raise DomainError(f"Concentration alpha must be nonnegative, got {alpha}.")
    logs = _conditional_logs(psi.root, alpha, n_oracle, rng)
    center = logs.mean(axis=0)
    dist2 = np.sum((logs - center) ** 2, axis=(1, 2))
    sigma2 = float(dist2.sum() / (n_oracle - 1))
    return ConditionalMoments(
        theta=SpdPoint.from_log(center),
        sigma2=sigma2,
        theta_se=float(np.sqrt(sigma2 / n_oracle)),
        sigma2_se=float(dist2.std(ddof=1) / np.sqrt(n_oracle)),
    )


def sample_spd_prior(k: int, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Factors F of scale matrices psi = F Fᵀ = W / k with W ~ Wishart(I, k)."""
    return wishart_factors(np.eye(k), k, size, rng) / np.sqrt(k)


@dataclass(frozen=True)
class PriorMoments:
    mu: SpdPoint
    sigma2: float
    tau2: float
    rho_x_mu2: float


def spd_prior_moments(
    k: int, alpha: int, pilot_reps: int, n_oracle: int, rng: np.random.Generator
) -> PriorMoments:
    """Moments of the hierarchical Wishart model from pilot draws of psi.

    In log coordinates the model is Hilbertian, so E log X = E log theta and the marginal spread
    splits as rho(X, mu)^2 = sigma2 + tau2.
    """
    if pilot_reps < 2:
        raise DomainError(f"Need at least two pilot draws, got {pilot_reps}.")
    means = []
    squares = []
    variances = []
    for psi in sample_spd_prior(k, (pilot_reps,), rng):
        moments = spd_conditional_moments(SpdPoint.from_log(factor_log(psi)), alpha, n_oracle, rng)
        means.append(moments.theta.log)
        variances.append(moments.sigma2)
        squares.append(moments.sigma2 * (n_oracle - 1) / n_oracle + float(np.sum(moments.theta.log**2)))
    center = np.mean(means, axis=0)
    rho_x_mu2 = float(np.mean(squares) - np.sum(center**2))
    sigma2 = float(np.mean(variances))
    tau2 = max(rho_x_mu2 - sigma2, 0.0)
    logger.info("SPD prior moments (alpha=%d): sigma2=%.4f tau2=%.4f", alpha, sigma2, tau2)
    return PriorMoments(SpdPoint.from_log(center), sigma2, tau2, rho_x_mu2)
