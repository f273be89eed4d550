"""Counterexamples: the tower rule failing on a tripod and shrinkage hurting on the circle."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..geometry.basic import circle_distances, circle_shrink
from ..geometry.core import WeightedDataset, brute_force_frechet_mean, conditional_frechet_mean_discrete
from ..geometry.tree import TRIPOD_A, TRIPOD_B, TRIPOD_C, TRIPOD_CENTER, tree_frechet_mean_trace, tripod
from .experiments import ExperimentResult, ExperimentSpec
from .output import ResultRow
from .report import Report, check, emit
from .risk import Outcome, run_replicates, summarize

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-9
TRIPOD_GRID_STEP = 1e-4
CIRCLE_HALF_WIDTH = math.pi / 2
CIRCLE_SIGMA2 = CIRCLE_HALF_WIDTH**2 / 3.0
ANTIPODE = math.pi
MC_SIGMAS = 4.0


def _tripod_row(spec: ExperimentSpec, quantity: str, value: float) -> ResultRow:
    return ResultRow("demo-tripod", 1, 0, "-", quantity, value, 0.0, 1, spec.seed)


def demo_tripod(spec: ExperimentSpec) -> ExperimentResult:
    """Y ~ Bernoulli(1/3); X | Y=0 is uniform on {A, C} and X | Y=1 sits at B.

    The unconditional mean of X is the center, but the conditional means form the law
    {center: 2/3, B: 1/3}, whose mean lies 2/3 of the way from the center toward B.
    """
    result = ExperimentResult(spec, report=Report("Tower rule on the tripod"))
    report = result.report
    tree = tripod()
    a, b, c, center = (tree.vertex(v) for v in (TRIPOD_A, TRIPOD_B, TRIPOD_C, TRIPOD_CENTER))

    d_ab = tree.distance(a, b)
    d_ac = tree.distance(a, c)
    emit(report, "tripod_distances", d_ab=d_ab, d_ac=d_ac)
    check(report, "d(A, B) = 3", math.isclose(d_ab, 3.0, abs_tol=EXACT_TOL), value=d_ab)
    check(report, "d(A, C) = 2", math.isclose(d_ac, 2.0, abs_tol=EXACT_TOL), value=d_ac)

    mean_x = conditional_frechet_mean_discrete(tree, [a, b, c], [1 / 3, 1 / 3, 1 / 3])
    given_0 = conditional_frechet_mean_discrete(tree, [a, c], [0.5, 0.5])
    given_1 = conditional_frechet_mean_discrete(tree, [b], [1.0])
    emit(report, "tripod_means", mean_x=mean_x, given_y0=given_0, given_y1=given_1)
    check(report, "E2 X is the center", tree.points_equal(mean_x, center), point=mean_x)
    check(report, "E2(X | Y=0) is the center", tree.points_equal(given_0, center), point=given_0)
    check(report, "E2(X | Y=1) is B", tree.points_equal(given_1, b), point=given_1)

    inner = WeightedDataset((given_0, given_1), (2 / 3, 1 / 3))
    trace = tree_frechet_mean_trace(tree, inner)
    gap = tree.distance(mean_x, trace.point)
    emit(report, "tripod_tower", mean_of_means=trace.point, value=trace.value, gap=gap)
    check(report, "tower-rule gap = 2/3", math.isclose(gap, 2 / 3, abs_tol=EXACT_TOL), gap=gap)

    grid_point, grid_value = brute_force_frechet_mean(tree, inner, tree.grid(TRIPOD_GRID_STEP))
    check(
        report,
        "descent agrees with grid search",
        tree.distance(grid_point, trace.point) <= TRIPOD_GRID_STEP,
        grid_point=grid_point,
        grid_value=grid_value,
    )
    emit(
        report,
        "note",
        text=(
            "The mean of the conditional means lies on the arm toward B at distance 2/3 from "
            "the center; it is not a point of the form [E2 X, C]_{1/3}, which would sit on the "
            "arm toward C."
        ),
    )

    result.rows.extend(
        [
            _tripod_row(spec, "d(A,B)", d_ab),
            _tripod_row(spec, "d(A,C)", d_ac),
            _tripod_row(spec, "tower_gap", gap),
        ]
    )
    return result


def _t_label(prefix: str, t: float) -> str:
    return f"{prefix}/t={t:g}"


@dataclass(frozen=True)
class CircleTask:
    """One draw of X around angle 0 scored for every t, plus one draw of ``groups`` iid angles."""

    t_grid: tuple[float, ...]
    groups: int

    def __call__(self, rng: np.random.Generator) -> Outcome:
        x = rng.uniform(-CIRCLE_HALF_WIDTH, CIRCLE_HALF_WIDTH)
        ts = np.asarray(self.t_grid)
        toward_antipode = circle_distances(circle_shrink(np.full(ts.size, x), ANTIPODE, ts), 0.0) ** 2
        toward_mean = circle_distances(circle_shrink(np.full(ts.size, x), 0.0, ts), 0.0) ** 2
        base = x * x
        losses: dict[str, float] = {}
        for t, far, near in zip(self.t_grid, toward_antipode.tolist(), toward_mean.tolist()):
            losses[_t_label("antipode", t)] = far
            losses[_t_label("mean", t)] = near
            losses[_t_label("gap", t)] = far - base

        angles = rng.uniform(-CIRCLE_HALF_WIDTH, CIRCLE_HALF_WIDTH, size=self.groups)
        dist2 = float(np.sum(circle_distances(angles, ANTIPODE) ** 2))
        weight = min(1.0, self.groups * CIRCLE_SIGMA2 / dist2)
        shrunk = circle_shrink(angles, ANTIPODE, weight)
        losses["js"] = float(np.mean(circle_distances(shrunk, 0.0) ** 2))
        losses["x"] = float(np.mean(angles**2))
        return Outcome(losses)


def demo_circle(spec: ExperimentSpec) -> ExperimentResult:
    """Shrinking toward the antipode of the mean on the circle raises the loss for every t > 0."""
    result = ExperimentResult(spec, report=Report("Shrinkage on the circle"))
    report = result.report
    t_grid = tuple(sorted(set(spec.t_grid)))
    outcomes = run_replicates(CircleTask(t_grid, spec.circle_groups), spec.reps, spec.seed, "demo-circle", spec.workers)
    risks = summarize(outcomes, spec.seed)

    for t in t_grid:
        for label, shrink_point in (("antipode", "pi"), ("mean", "0")):
            risk = risks[_t_label(label, t)]
            result.rows.append(
                ResultRow("demo-circle", 1, t, shrink_point, "fixed-t", risk.mean_loss, risk.std_error, risk.replicates,
                          spec.seed)
            )
    for label, shrink_point in (("js", "pi"), ("x", "-")):
        risk = risks[label]
        result.rows.append(
            ResultRow("demo-circle", spec.circle_groups, 0, shrink_point, label, risk.mean_loss, risk.std_error,
                      risk.replicates, spec.seed)
        )

    emit(
        report,
        "circle_table",
        rows=[
            (t, risks[_t_label("antipode", t)].mean_loss, risks[_t_label("mean", t)].mean_loss)
            for t in t_grid
        ],
    )

    if 0.0 in t_grid:
        start = risks[_t_label("antipode", 0.0)]
        check(
            report,
            "risk(0) = pi^2/12",
            abs(start.mean_loss - CIRCLE_SIGMA2) <= MC_SIGMAS * start.std_error,
            value=start.mean_loss,
            expected=CIRCLE_SIGMA2,
        )
    for t in t_grid:
        if t == 0.0:
            continue
        gap = risks[_t_label("gap", t)]
        check(
            report,
            f"risk({t:g}) > risk(0)",
            gap.mean_loss > MC_SIGMAS * gap.std_error,
            excess=gap.mean_loss,
            std_error=gap.std_error,
        )
    means = [risks[_t_label("antipode", t)].mean_loss for t in t_grid]
    check(report, "risk increasing in t", all(lo < hi for lo, hi in zip(means, means[1:])))

    positive = [t for t in t_grid if t > 0.0]
    if 0.0 in t_grid and positive:
        first = min(positive)
        check(
            report,
            f"shrinking toward the mean helps at t={first:g}",
            risks[_t_label("mean", first)].mean_loss < risks[_t_label("mean", 0.0)].mean_loss,
        )

    js = risks["js"]
    check(
        report,
        "James-Stein toward the antipode is worse than X",
        js.mean_loss - CIRCLE_SIGMA2 > MC_SIGMAS * js.std_error,
        risk=js.mean_loss,
        sigma2=CIRCLE_SIGMA2,
    )
    logger.info("Circle demo: %d replicates over %d weights", spec.reps, len(t_grid))
    return result
