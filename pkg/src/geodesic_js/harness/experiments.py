"""Simulation studies: the 3-regular tree Bayes-risk table and the two Wishart studies."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..estimators import AdaptiveSampleMean, FixedPoint, FixedWeight, OracleMu, flat_geodesic_js, oracle_weight
from ..geometry.core import ProductSpace
from ..geometry.spd import SpdPoint, factor_log
from ..geometry.tree import ORIGIN, RegularTree
from ..samplers import (
    RngStream,
    conditional_draws,
    sample_spd_prior,
    spd_conditional_moments,
    spd_prior_moments,
    walk_distance_distribution,
)
from .output import ResultRow
from .report import ExperimentError, Report, check, emit
from .risk import (
    JamesSteinEstimator,
    LazyWalkGroups,
    LazyWalkPrior,
    Outcome,
    mc_bayes_risks,
    run_replicates,
    summarize,
)

logger = logging.getLogger(__name__)

ExperimentName = Literal["table1", "spd-bayes", "spd-freq", "demo-tripod", "demo-circle", "validate"]

ADAPTIVE = "xbar"
ORACLE_MU = "mu"
BEST = "best"
IDENTITY = "x"

EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "table1": {"reps": 20_000, "n_values": [2]},
    "spd-bayes": {
        "reps": 1_000,
        "inner_reps": 100,
        "ghost_reps": 100,
        "oracle_reps": 10_000,
        "n_values": [2, 3, 5, 10, 15, 20, 30, 40, 50],
        "shrink_points": ["0.1I", "I", "10I", "100I", ADAPTIVE, ORACLE_MU, BEST],
    },
    "spd-freq": {
        "reps": 1_000,
        "oracle_reps": 10_000,
        "n_values": [1, 2, 3, 5, 8, 10, 15, 20, 25, 30, 40, 50, 60],
        "shrink_points": ["10I", "100I", ADAPTIVE],
    },
    "demo-circle": {"reps": 100_000},
}


def identity_scale(label: str) -> float | None:
    """``"10I"`` -> 10.0, ``"I"`` -> 1.0; None for the symbolic shrinkage points."""
    if not label.endswith("I"):
        return None
    return float(label[:-1]) if label[:-1] else 1.0


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName
    seed: int = Field(default=20_240_601, ge=0, lt=2**64)
    reps: int = Field(default=20_000, ge=1)
    oracle_reps: int = Field(default=100_000, ge=10_000)
    workers: int = Field(default=1, ge=1)
    n_values: list[int] = Field(default_factory=lambda: [2])
    shrink_points: list[str] = Field(default_factory=list)
    k: int = Field(default=3, ge=1, le=10)
    alphas: list[int] = Field(default_factory=lambda: [0, 2, 8])
    k_sigma: list[int] = Field(default_factory=lambda: [1, 5, 10, 15, 20, 25, 30])
    k_tau: int = Field(default=15, ge=0)
    psi_distances: list[int] = Field(default_factory=lambda: [0, 1, 4, 8, 16, 32])
    inner_reps: int = Field(default=100, ge=1)
    ghost_reps: int = Field(default=100, ge=2)
    pilot_reps: int = Field(default=200, ge=2)
    psi_draws: int = Field(default=100, ge=1)
    t_grid: list[float] = Field(default_factory=lambda: [round(0.05 * i, 2) for i in range(11)])
    circle_groups: int = Field(default=10, ge=1)
    cases: int = Field(default=100_000, ge=1)
    spaces: list[str] = Field(default_factory=list)
    out: Path = Path("results")
    plots: bool = False

    @field_validator("n_values", "k_sigma")
    @classmethod
    def _positive(cls, values: list[int]) -> list[int]:
        if not values or any(v < 1 for v in values):
            raise ValueError("must be a nonempty list of positive integers")
        return values

    @field_validator("alphas", "psi_distances")
    @classmethod
    def _nonnegative(cls, values: list[int]) -> list[int]:
        if any(v < 0 for v in values):
            raise ValueError("entries must be nonnegative")
        return values

    @field_validator("t_grid")
    @classmethod
    def _unit_interval(cls, values: list[float]) -> list[float]:
        if not values or any(not 0.0 <= t <= 1.0 for t in values):
            raise ValueError("shrinkage weights must lie in [0, 1]")
        return values

    @field_validator("shrink_points")
    @classmethod
    def _known_points(cls, values: list[str]) -> list[str]:
        for label in values:
            if label in (ADAPTIVE, ORACLE_MU, BEST):
                continue
            try:
                scale = identity_scale(label)
            except ValueError:
                scale = None
            if scale is None or scale <= 0:
                raise ValueError(f"unknown shrinkage point {label!r}; use xbar, mu, best or <c>I")
        return values

    @classmethod
    def for_experiment(cls, experiment: str, **overrides: Any) -> ExperimentSpec:
        values = {**EXPERIMENT_DEFAULTS.get(experiment, {}), **overrides}
        return cls(experiment=experiment, **values)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[ResultRow] = field(default_factory=list)
    report: Report = field(default_factory=lambda: Report("experiment"))


def psi_word(distance: int) -> tuple[int, ...]:
    return (0,) * distance


def run_table1(spec: ExperimentSpec) -> ExperimentResult:
    """Bayes risk over sigma2 for n = 2 lazy-walk groups on the 3-regular tree.

    theta_i is a k_tau-step walk from the origin and X_i a k_sigma-step walk from theta_i. Cells
    report E[loss] / sigma2 with sigma2 from the exact distance law.
    """
    result = ExperimentResult(spec, report=Report("Bayes risk ratios on the 3-regular tree"))
    tree = RegularTree()
    space = ProductSpace.uniform(tree, 2)
    origin = tree.vertex(ORIGIN)
    tau2 = walk_distance_distribution(spec.k_tau).second_moment()

    for k_sigma in spec.k_sigma:
        sigma2 = walk_distance_distribution(k_sigma).second_moment()
        rho_x = walk_distance_distribution(spec.k_tau + k_sigma).second_moment()
        t_oracle = oracle_weight(sigma2, rho_x, tau2).weight
        estimators: dict[str, Any] = {
            f"d={d}": JamesSteinEstimator(FixedPoint(tree.vertex(psi_word(d)))) for d in spec.psi_distances
        }
        estimators[ADAPTIVE] = JamesSteinEstimator(AdaptiveSampleMean())
        estimators["oracle"] = JamesSteinEstimator(OracleMu(origin), FixedWeight(t_oracle))

        risks = mc_bayes_risks(
            space,
            LazyWalkPrior(spec.k_tau, 2),
            LazyWalkGroups(k_sigma),
            estimators,
            spec.reps,
            spec.seed,
            spec.workers,
            tag=f"table1/k_sigma={k_sigma}",
        )
        for label, risk in risks.items():
            ratio = risk.scaled(1.0 / sigma2)
            result.rows.append(
                ResultRow(
                    experiment="table1",
                    n=2,
                    alpha_or_ksigma=k_sigma,
                    shrink_point="mu" if label == "oracle" else label,
                    estimator="oracle" if label == "oracle" else "js",
                    mean_loss=ratio.mean_loss,
                    std_error=ratio.std_error,
                    replicates=ratio.replicates,
                    seed=spec.seed,
                )
            )
            check(result.report, f"loss bound k_sigma={k_sigma} {label}", risk.bound_violations == 0,
                  violations=risk.bound_violations)
        emit(
            result.report,
            "table1_row",
            k_sigma=k_sigma,
            sigma2=sigma2,
            oracle_weight=t_oracle,
            ratios={label: risk.mean_loss / sigma2 for label, risk in risks.items()},
        )
        logger.info("Table row k_sigma=%d done (sigma2=%.4f)", k_sigma, sigma2)
    return result


def _flat(matrices: np.ndarray) -> np.ndarray:
    return matrices.reshape(*matrices.shape[:-2], -1)


def _fixed_targets(labels: list[str], k: int) -> dict[str, np.ndarray]:
    targets = {}
    for label in labels:
        scale = identity_scale(label)
        if scale is not None:
            targets[label] = (np.eye(k) * math.log(scale)).reshape(-1)
    return targets


def _flat_estimates(
    x: np.ndarray,
    labels: tuple[str, ...],
    targets: dict[str, np.ndarray],
    sigma2: float | np.ndarray,
    mu: np.ndarray | None = None,
    best_weight: float = 0.0,
) -> dict[str, np.ndarray]:
    """Estimates in log coordinates for a batch ``x`` of shape (draws, n, k*k)."""
    estimates = {IDENTITY: x}
    for label in labels:
        if label in targets:
            estimates[label] = flat_geodesic_js(x, targets[label], sigma2).coords
        elif label == ADAPTIVE:
            estimates[label] = flat_geodesic_js(x, x.mean(axis=-2, keepdims=True), sigma2).coords
        elif label == ORACLE_MU and mu is not None:
            estimates[label] = flat_geodesic_js(x, mu, sigma2).coords
        elif label == BEST and mu is not None:
            estimates[label] = x + best_weight * (mu - x)
    return estimates


@dataclass(frozen=True)
class SpdBayesTask:
    """One prior draw of n_max scale matrices, scored on ``inner`` observation draws.

    The Fréchet means theta_i have no closed form, so the loss uses ``ghosts`` further
    independent draws per group: with G their mean and s2 = sum_j |G_j - G|^2 / (ghosts - 1),
    |est - G|^2 - s2 / ghosts is unbiased for |est - theta|^2.
    """

    k: int
    alpha: int
    n_values: tuple[int, ...]
    labels: tuple[str, ...]
    targets: dict[str, np.ndarray]
    sigma2: float
    mu: np.ndarray
    best_weight: float
    inner: int
    ghosts: int

    def __call__(self, rng: np.random.Generator) -> Outcome:
        n_max = max(self.n_values)
        psi = sample_spd_prior(self.k, (n_max,), rng)
        ys = _flat(conditional_draws(psi, self.alpha, (self.inner,), rng))
        ghosts = _flat(conditional_draws(psi, self.alpha, (self.ghosts,), rng))
        center = ghosts.mean(axis=0)
        spread = np.sum((ghosts - center) ** 2, axis=(0, 2)) / (self.ghosts * (self.ghosts - 1))
        losses: dict[str, float] = {}
        for n in self.n_values:
            estimates = _flat_estimates(ys[:, :n], self.labels, self.targets, self.sigma2, self.mu, self.best_weight)
            for label, coords in estimates.items():
                per_group = np.sum((coords - center[:n]) ** 2, axis=-1) - spread[:n]
                losses[f"{n}|{label}"] = float(per_group.mean())
        return Outcome(losses)


def _split_key(key: str) -> tuple[int, str]:
    n, label = key.split("|", 1)
    return int(n), label


def _row(experiment: str, key: str, alpha: float, mean: float, se: float, reps: int, seed: int) -> ResultRow:
    n, label = _split_key(key)
    if label == IDENTITY:
        shrink_point, estimator = "-", "x"
    elif label == BEST:
        shrink_point, estimator = ORACLE_MU, "oracle"
    else:
        shrink_point, estimator = label, "js"
    return ResultRow(experiment, n, alpha, shrink_point, estimator, mean, se, reps, seed)


def run_spd_bayes(spec: ExperimentSpec) -> ExperimentResult:
    """Bayes risk against n for the hierarchical Wishart model, one curve per shrinkage point."""
    result = ExperimentResult(spec, report=Report("Bayes risk for log-Euclidean SPD groups"))
    labels = tuple(spec.shrink_points)
    targets = _fixed_targets(list(labels), spec.k)
    for alpha in spec.alphas:
        pilot = RngStream(spec.seed).child("spd-bayes/prior", alpha).generator()
        moments = spd_prior_moments(spec.k, alpha, spec.pilot_reps, spec.oracle_reps, pilot)
        best = oracle_weight(moments.sigma2, moments.rho_x_mu2, moments.tau2).weight
        task = SpdBayesTask(
            k=spec.k,
            alpha=alpha,
            n_values=tuple(spec.n_values),
            labels=labels,
            targets=targets,
            sigma2=moments.sigma2,
            mu=moments.mu.log.reshape(-1),
            best_weight=best,
            inner=spec.inner_reps,
            ghosts=spec.ghost_reps,
        )
        outcomes = run_replicates(task, spec.reps, spec.seed, f"spd-bayes/alpha={alpha}", spec.workers)
        risks = summarize(outcomes, spec.seed)
        for key, risk in risks.items():
            result.rows.append(
                _row("spd-bayes", key, alpha, risk.mean_loss, risk.std_error, risk.replicates, spec.seed)
            )
        ratios = {
            key: risk.mean_loss / risks[f"{_split_key(key)[0]}|{IDENTITY}"].mean_loss
            for key, risk in risks.items()
        }
        emit(
            result.report,
            "spd_bayes",
            alpha=alpha,
            sigma2=moments.sigma2,
            tau2=moments.tau2,
            best_weight=best,
            ratios=ratios,
        )
        logger.info("SPD Bayes alpha=%d done (sigma2=%.4f, tau2=%.4f)", alpha, moments.sigma2, moments.tau2)
    return result


@dataclass(frozen=True)
class SpdFreqTask:
    """Frequentist risks at one draw of n_max scale matrices, with theta_i and sigma_i^2 from the oracle."""

    k: int
    n_values: tuple[int, ...]
    labels: tuple[str, ...]
    targets: dict[str, np.ndarray]
    inner: int
    oracle_reps: int

    def __call__(self, rng: np.random.Generator) -> Outcome:
        n_max = max(self.n_values)
        psi = sample_spd_prior(self.k, (n_max,), rng)
        moments = [spd_conditional_moments(SpdPoint.from_log(factor_log(p)), 0, self.oracle_reps, rng) for p in psi]
        theta = np.stack([m.theta.log.reshape(-1) for m in moments])
        sigma2 = np.array([m.sigma2 for m in moments])
        ys = _flat(conditional_draws(psi, 0, (self.inner,), rng))
        losses: dict[str, float] = {}
        for n in self.n_values:
            estimates = _flat_estimates(ys[:, :n], self.labels, self.targets, sigma2[:n])
            for label, coords in estimates.items():
                losses[f"{n}|{label}"] = float(np.sum((coords - theta[:n]) ** 2, axis=-1).mean())
        return Outcome(losses)


def run_spd_freq(spec: ExperimentSpec) -> ExperimentResult:
    """Share of prior draws of the scale matrices at which James-Stein beats X, against n."""
    result = ExperimentResult(spec, report=Report("Frequentist domination for log-Euclidean SPD groups"))
    labels = tuple(label for label in spec.shrink_points if label not in (ORACLE_MU, BEST))
    if not labels:
        raise ExperimentError("spd-freq needs at least one fixed or xbar shrinkage point.")
    task = SpdFreqTask(
        k=spec.k,
        n_values=tuple(spec.n_values),
        labels=labels,
        targets=_fixed_targets(list(labels), spec.k),
        inner=spec.reps,
        oracle_reps=spec.oracle_reps,
    )
    outcomes = run_replicates(task, spec.psi_draws, spec.seed, "spd-freq", spec.workers)
    risks = summarize(outcomes, spec.seed)
    for key, risk in risks.items():
        result.rows.append(_row("spd-freq", key, 0, risk.mean_loss, risk.std_error, spec.reps, spec.seed))

    draws = len(outcomes)
    proportions: dict[str, dict[int, float]] = {label: {} for label in labels}
    for n in spec.n_values:
        for label in labels:
            wins = sum(o.losses[f"{n}|{label}"] < o.losses[f"{n}|{IDENTITY}"] for o in outcomes)
            share = wins / draws
            proportions[label][n] = share
            result.rows.append(
                ResultRow(
                    "spd-freq", n, 0, label, "proportion", share, math.sqrt(share * (1 - share) / draws), draws,
                    spec.seed,
                )
            )
    emit(result.report, "spd_freq", proportions=proportions, draws=draws)
    return result
