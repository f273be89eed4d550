"""Monte Carlo risk estimation with per-replicate random streams.

A replicate task maps a generator to the losses of every estimator evaluated on the same draws.
Replicates are grouped into fixed-size chunks for the worker pool; replicate ``r`` always reads
stream ``(seed, (tag, r))`` and sums use ``math.fsum``, so results do not depend on the number
of workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, partial
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

from ..estimators import (
    JamesStein,
    ShrinkageEstimate,
    ShrinkageSpec,
    ShrinkPoint,
    WeightMode,
    geodesic_js,
    loss_bound,
)
from ..geometry.basic import CirclePoint, EuclideanPoint, classical_js
from ..geometry.core import DomainError, ProductPoint, ProductSpace
from ..geometry.tree import ORIGIN, RegularTree, TreeWord
from ..samplers import RngStream, lazy_walk_3regular, tag_key, walk_distance_distribution

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256
AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class RiskEstimate:
    mean_loss: float
    std_error: float
    replicates: int
    seed: int
    metadata: dict[str, Any] = field(default_factory=dict)
    bound_violations: int = 0

    @classmethod
    def from_losses(
        cls, losses: Sequence[float], seed: int, metadata: dict[str, Any] | None = None, violations: int = 0
    ) -> RiskEstimate:
        reps = len(losses)
        if reps < 1:
            raise DomainError("A risk estimate needs at least one replicate.")
        mean = math.fsum(losses) / reps
        if reps > 1:
            variance = math.fsum((loss - mean) ** 2 for loss in losses) / (reps - 1)
            std_error = math.sqrt(variance / reps)
        else:
            std_error = 0.0
        return cls(mean, std_error, reps, seed, dict(metadata or {}), violations)

    def scaled(self, factor: float) -> RiskEstimate:
        return RiskEstimate(
            self.mean_loss * factor,
            self.std_error * factor,
            self.replicates,
            self.seed,
            self.metadata,
            self.bound_violations,
        )


@dataclass(frozen=True)
class Outcome:
    losses: dict[str, float]
    violations: frozenset[str] = frozenset()


class ReplicateTask(Protocol):
    def __call__(self, rng: np.random.Generator) -> Outcome:
        ...


def _run_chunk(task: ReplicateTask, seed: int, key: int, bounds: tuple[int, int]) -> list[Outcome]:
    start, stop = bounds
    return [task(RngStream(seed, (key, r)).generator()) for r in range(start, stop)]


def run_replicates(
    task: ReplicateTask, reps: int, seed: int, tag: str, workers: int = 1
) -> list[Outcome]:
    if reps < 1:
        raise DomainError(f"Replicate count must be at least 1, got {reps}.")
    key = tag_key(tag)
    chunks = [(start, min(start + CHUNK_SIZE, reps)) for start in range(0, reps, CHUNK_SIZE)]
    runner = partial(_run_chunk, task, seed, key)
    if workers <= 1 or len(chunks) == 1:
        results = [runner(chunk) for chunk in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(runner, chunks))
    return [outcome for chunk in results for outcome in chunk]


def summarize(
    outcomes: Sequence[Outcome], seed: int, metadata: Mapping[str, Any] | None = None
) -> dict[str, RiskEstimate]:
    labels = list(outcomes[0].losses)
    estimates = {}
    for label in labels:
        losses = [outcome.losses[label] for outcome in outcomes]
        violations = sum(label in outcome.violations for outcome in outcomes)
        if violations:
            logger.warning("%s: %d replicates exceeded the CAT(0) loss bound", label, violations)
        meta = {**(metadata or {}), "estimator": label}
        estimates[label] = RiskEstimate.from_losses(losses, seed, meta, violations)
    return estimates


class Estimator(Protocol):
    def __call__(self, space: ProductSpace, x: ProductPoint, sigma2: float) -> ProductPoint | ShrinkageEstimate:
        ...


@dataclass(frozen=True)
class IdentityEstimator:
    def __call__(self, space: ProductSpace, x: ProductPoint, sigma2: float) -> ProductPoint:
        return x


@dataclass(frozen=True)
class ConstantEstimator:
    point: Any

    def __call__(self, space: ProductSpace, x: ProductPoint, sigma2: float) -> ProductPoint:
        return self.point if isinstance(self.point, ProductPoint) else ProductPoint((self.point,) * space.n)


@dataclass(frozen=True)
class JamesSteinEstimator:
    shrink_point: ShrinkPoint
    weight: WeightMode = JamesStein()

    def __call__(self, space: ProductSpace, x: ProductPoint, sigma2: float) -> ShrinkageEstimate:
        return geodesic_js(space, x, ShrinkageSpec(sigma2, self.shrink_point, self.weight))


@dataclass(frozen=True)
class ClassicalJsEstimator:
    """Unclamped Stein estimator on one-dimensional groups stacked into a single vector."""

    psi: float = 0.0

    def __call__(self, space: ProductSpace, x: ProductPoint, sigma2: float) -> ProductPoint:
        coords = np.concatenate([p.coords for p in x])
        result = classical_js(EuclideanPoint(coords), EuclideanPoint(np.full(coords.size, self.psi)), sigma2)
        return ProductPoint(tuple(EuclideanPoint(np.atleast_1d(c)) for c in result.point.coords))


def evaluate(
    space: ProductSpace,
    theta: ProductPoint,
    x: ProductPoint,
    sigma2: float,
    estimators: Mapping[str, Estimator],
) -> Outcome:
    """Losses of every estimator on one draw, auditing shrinkage estimates against the CAT(0) bound."""
    losses: dict[str, float] = {}
    violations = set()
    for label, estimator in estimators.items():
        result = estimator(space, x, sigma2)
        if isinstance(result, ShrinkageEstimate):
            loss = space.distance(theta, result.points) ** 2
            if space.is_hadamard:
                bound = loss_bound(space, theta, x, result.shrink_point, result.weight_applied).bound
                if loss > bound + AUDIT_TOL * max(1.0, bound):
                    violations.add(label)
        else:
            loss = space.distance(theta, result) ** 2
        losses[label] = loss
    return Outcome(losses, frozenset(violations))


class ConditionalSampler(Protocol):
    sigma2: float

    def __call__(self, theta: ProductPoint, rng: np.random.Generator) -> ProductPoint:
        ...


class PriorSampler(Protocol):
    def __call__(self, rng: np.random.Generator) -> ProductPoint:
        ...


@dataclass(frozen=True)
class GaussianGroups:
    sd: float = 1.0
    dim: int = 1

    @property
    def sigma2(self) -> float:
        return self.dim * self.sd**2

    def __call__(self, theta: ProductPoint, rng: np.random.Generator) -> ProductPoint:
        return ProductPoint(
            tuple(EuclideanPoint(p.coords + self.sd * rng.standard_normal(p.coords.size)) for p in theta)
        )


@dataclass(frozen=True)
class DegenerateGroups:
    sigma2: float = 0.0

    def __call__(self, theta: ProductPoint, rng: np.random.Generator) -> ProductPoint:
        return theta


@dataclass(frozen=True)
class LazyWalkGroups:
    steps: int

    @cached_property
    def sigma2(self) -> float:
        return walk_distance_distribution(self.steps).second_moment()

    def __call__(self, theta: ProductPoint, rng: np.random.Generator) -> ProductPoint:
        space = RegularTree()
        return ProductPoint(tuple(space.vertex(lazy_walk_3regular(p.tail, self.steps, rng)) for p in theta))


@dataclass(frozen=True)
class UniformArcGroups:
    """Angles uniform on an arc of half-width ``half_width`` around each theta."""

    half_width: float = math.pi / 2

    @property
    def sigma2(self) -> float:
        return self.half_width**2 / 3.0

    def __call__(self, theta: ProductPoint, rng: np.random.Generator) -> ProductPoint:
        noise = rng.uniform(-self.half_width, self.half_width, size=len(theta))
        return ProductPoint(tuple(CirclePoint(p.angle + e) for p, e in zip(theta, noise.tolist())))


@dataclass(frozen=True)
class LazyWalkPrior:
    steps: int
    n: int
    origin: TreeWord = ORIGIN

    @cached_property
    def tau2(self) -> float:
        return walk_distance_distribution(self.steps).second_moment()

    def __call__(self, rng: np.random.Generator) -> ProductPoint:
        space = RegularTree()
        return ProductPoint(
            tuple(space.vertex(lazy_walk_3regular(self.origin, self.steps, rng)) for _ in range(self.n))
        )


@dataclass(frozen=True)
class GaussianPrior:
    n: int
    tau: float = 1.0
    dim: int = 1
    mean: float = 0.0

    @property
    def tau2(self) -> float:
        return self.dim * self.tau**2

    def __call__(self, rng: np.random.Generator) -> ProductPoint:
        return ProductPoint(
            tuple(EuclideanPoint(self.mean + self.tau * rng.standard_normal(self.dim)) for _ in range(self.n))
        )


@dataclass(frozen=True)
class FrequentistTask:
    space: ProductSpace
    theta: ProductPoint
    sampler: ConditionalSampler
    estimators: Mapping[str, Estimator]

    def __call__(self, rng: np.random.Generator) -> Outcome:
        x = self.sampler(self.theta, rng)
        return evaluate(self.space, self.theta, x, self.sampler.sigma2, self.estimators)


@dataclass(frozen=True)
class BayesTask:
    space: ProductSpace
    prior: PriorSampler
    sampler: ConditionalSampler
    estimators: Mapping[str, Estimator]

    def __call__(self, rng: np.random.Generator) -> Outcome:
        theta = self.prior(rng)
        x = self.sampler(theta, rng)
        return evaluate(self.space, theta, x, self.sampler.sigma2, self.estimators)


def mc_frequentist_risks(
    space: ProductSpace,
    theta: ProductPoint,
    sampler: ConditionalSampler,
    estimators: Mapping[str, Estimator],
    reps: int,
    seed: int,
    workers: int = 1,
    tag: str = "frequentist",
    metadata: Mapping[str, Any] | None = None,
) -> dict[str, RiskEstimate]:
    outcomes = run_replicates(FrequentistTask(space, theta, sampler, dict(estimators)), reps, seed, tag, workers)
    return summarize(outcomes, seed, {"n": space.n, **(metadata or {})})


def mc_frequentist_risk(
    space: ProductSpace,
    theta: ProductPoint,
    sampler: ConditionalSampler,
    estimator: Estimator,
    reps: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    return mc_frequentist_risks(space, theta, sampler, {"estimator": estimator}, reps, seed, workers)["estimator"]


def mc_bayes_risks(
    space: ProductSpace,
    prior: PriorSampler,
    sampler: ConditionalSampler,
    estimators: Mapping[str, Estimator],
    reps: int,
    seed: int,
    workers: int = 1,
    tag: str = "bayes",
    metadata: Mapping[str, Any] | None = None,
) -> dict[str, RiskEstimate]:
    outcomes = run_replicates(BayesTask(space, prior, sampler, dict(estimators)), reps, seed, tag, workers)
    return summarize(outcomes, seed, {"n": space.n, **(metadata or {})})


def mc_bayes_risk(
    space: ProductSpace,
    prior: PriorSampler,
    sampler: ConditionalSampler,
    estimator: Estimator,
    reps: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    return mc_bayes_risks(space, prior, sampler, {"estimator": estimator}, reps, seed, workers)["estimator"]

