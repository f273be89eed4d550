"""Randomized property suites for the geodesic spaces and the tree Fréchet-mean descent."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Sequence

import numpy as np

from ..estimators import AdaptiveSampleMean, FixedPoint
from ..geometry.basic import CirclePoint, CircleSpace, EuclideanPoint, EuclideanSpace
from ..geometry.core import (
    GeodesicSpace,
    ProductPoint,
    ProductSpace,
    WeightedDataset,
    cat0_slack,
    geodesic_convexity_gap,
)
from ..geometry.spd import SpdPoint, SpdSpace
from ..geometry.tree import RegularTree, TreePoint, TreeWord, WeightedTree, tree_frechet_mean_trace
from ..samplers import RngStream
from .experiments import ExperimentResult, ExperimentSpec
from .report import ExperimentError, Report, check, emit
from .risk import GaussianGroups, IdentityEstimator, JamesSteinEstimator, mc_frequentist_risks

logger = logging.getLogger(__name__)

SLACK_TOL = 1e-9
FLAT_TOL = 1e-8
ORACLE_VALUE_TOL = 1e-4
ORACLE_INSTANCES = 200
MAX_ORACLE_POINTS = 10
MAX_WORD_LENGTH = 6
DETERMINISM_REPS = 600
SPACES = ("euclidean", "spd", "tree", "regular-tree", "circle")

PointSampler = Callable[[np.random.Generator], Any]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    space: str
    cases: int
    failures: int
    worst: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failures == 0


def random_weighted_tree(
    rng: np.random.Generator, max_vertices: int = 30, weight_range: tuple[float, float] = (0.1, 3.0)
) -> WeightedTree:
    """Random recursive tree with shuffled labels and uniform edge weights."""
    if max_vertices < 2:
        raise ExperimentError("Random trees need room for at least two vertices.")
    m = int(rng.integers(2, max_vertices + 1))
    labels = rng.permutation(m)
    edges = []
    for child in range(1, m):
        parent = int(rng.integers(0, child))
        u, v = int(labels[parent]), int(labels[child])
        if rng.random() < 0.5:
            u, v = v, u
        edges.append((u, v, float(rng.uniform(*weight_range))))
    return WeightedTree(tuple(edges), n_vertices=m, name="random-tree")


def random_tree_point(rng: np.random.Generator, tree: WeightedTree) -> TreePoint[int]:
    """A vertex or an edge-interior point, each with probability 1/2."""
    if tree.n_vertices == 1 or rng.random() < 0.5:
        return tree.vertex(int(rng.integers(0, tree.n_vertices)))
    u, v, length = tree.edges[int(rng.integers(0, len(tree.edges)))]
    return TreePoint(u, v, length * float(rng.uniform(0.05, 0.95)))


def random_word(rng: np.random.Generator, max_length: int = MAX_WORD_LENGTH) -> TreeWord:
    length = int(rng.integers(0, max_length + 1))
    if length == 0:
        return ()
    return (int(rng.integers(0, 3)),) + tuple(int(b) for b in rng.integers(0, 2, size=length - 1))


def random_word_point(rng: np.random.Generator) -> TreePoint[TreeWord]:
    word = random_word(rng)
    if rng.random() < 0.5:
        return TreePoint(word, word, 0.0)
    child = word + (int(rng.integers(0, 3 if not word else 2)),)
    return TreePoint(word, child, float(rng.uniform(0.05, 0.95)))


def _random_symmetric(rng: np.random.Generator, k: int) -> np.ndarray:
    a = rng.standard_normal((k, k))
    return 0.5 * (a + a.T)


def space_samplers(rng: np.random.Generator) -> dict[str, tuple[GeodesicSpace, PointSampler]]:
    """One space per suite target; the finite-tree target uses a single random tree per call."""
    tree = random_weighted_tree(rng)
    return {
        "euclidean": (EuclideanSpace(3), lambda g: EuclideanPoint(g.standard_normal(3))),
        "spd": (SpdSpace(3), lambda g: SpdPoint.from_log(_random_symmetric(g, 3))),
        "tree": (tree, lambda g: random_tree_point(g, tree)),
        "regular-tree": (RegularTree(), random_word_point),
        "circle": (CircleSpace(), lambda g: CirclePoint(g.uniform(0.0, 2 * math.pi))),
    }


def _scale(*values: float) -> float:
    return max(1.0, *values)


def metric_axioms(space: GeodesicSpace, sample: PointSampler, cases: int, rng: np.random.Generator) -> list[CheckResult]:
    identity = symmetry = positivity = triangle = 0
    worst = 0.0
    for _ in range(cases):
        x, y, z = sample(rng), sample(rng), sample(rng)
        dxy, dyx = space.distance(x, y), space.distance(y, x)
        dxz, dzy = space.distance(x, z), space.distance(z, y)
        tol = SLACK_TOL * _scale(dxy, dxz, dzy)
        if space.distance(x, x) > tol:
            identity += 1
        if abs(dxy - dyx) > tol:
            symmetry += 1
        if dxy < 0:
            positivity += 1
        excess = dxy - (dxz + dzy)
        worst = max(worst, excess)
        if excess > tol:
            triangle += 1
    return [
        CheckResult("metric/identity", space.name, cases, identity),
        CheckResult("metric/symmetry", space.name, cases, symmetry),
        CheckResult("metric/nonnegative", space.name, cases, positivity),
        CheckResult("metric/triangle", space.name, cases, triangle, worst),
    ]


def geodesic_speed(space: GeodesicSpace, sample: PointSampler, cases: int, rng: np.random.Generator) -> CheckResult:
    """d(x, [x, y]_t) = t d(x, y) and d([x, y]_t, y) = (1 - t) d(x, y)."""
    failures = 0
    worst = 0.0
    for _ in range(cases):
        x, y = sample(rng), sample(rng)
        t = float(rng.random())
        d = space.distance(x, y)
        mid = space.interpolate(x, y, t)
        error = max(abs(space.distance(x, mid) - t * d), abs(space.distance(mid, y) - (1 - t) * d))
        worst = max(worst, error)
        if error > SLACK_TOL * _scale(d):
            failures += 1
    return CheckResult("geodesic/speed", space.name, cases, failures, worst)


def cat0_inequality(space: GeodesicSpace, sample: PointSampler, cases: int, rng: np.random.Generator) -> CheckResult:
    """Slack is nonnegative in a Hadamard space and zero up to rounding in a flat one."""
    failures = 0
    worst = 0.0
    for _ in range(cases):
        x, y, z = sample(rng), sample(rng), sample(rng)
        t = float(rng.random())
        slack = cat0_slack(space, x, y, z, t)
        scale = _scale(space.distance(x, z), space.distance(y, z), space.distance(x, y)) ** 2
        if space.is_flat:
            worst = max(worst, abs(slack))
            failures += abs(slack) > FLAT_TOL * scale
        else:
            worst = max(worst, -slack)
            failures += slack < -SLACK_TOL * scale
    return CheckResult("cat0/equality" if space.is_flat else "cat0/slack", space.name, cases, failures, worst)


def pair_convexity(space: GeodesicSpace, sample: PointSampler, cases: int, rng: np.random.Generator) -> CheckResult:
    failures = 0
    worst = 0.0
    for _ in range(cases):
        x, y, w, z = sample(rng), sample(rng), sample(rng), sample(rng)
        gap = geodesic_convexity_gap(space, x, y, w, z, float(rng.random()))
        scale = _scale(space.distance(x, w), space.distance(y, z))
        worst = max(worst, -gap)
        if gap < -SLACK_TOL * scale:
            failures += 1
    return CheckResult("geodesic/convexity", space.name, cases, failures, worst)


@dataclass(frozen=True)
class GridOptimum:
    point: TreePoint[int]
    value: float
    step: float


def tree_grid_oracle(tree: WeightedTree, data: WeightedDataset[TreePoint[int]], step: float | None = None) -> GridOptimum:
    """Minimize the Fréchet functional over a grid on every edge.

    Along edge (u, v) of length L the distance to x at arc position s is
    min(s + d(u, x), L - s + d(v, x)), or |s - offset| when x lies inside that edge.
    """
    step = step if step is not None else 1e-3 * min((w for _, _, w in tree.edges), default=1.0)
    weights = np.asarray(data.weights, dtype=float)
    to_vertex = np.array(
        [[tree.distance(tree.vertex(v), x) for x in data.points] for v in range(tree.n_vertices)]
    )
    best = GridOptimum(tree.vertex(0), math.inf, step)
    if not tree.edges:
        value = float(np.dot(weights, to_vertex[0] ** 2))
        return GridOptimum(tree.vertex(0), value, step)
    for u, v, length in tree.edges:
        s = np.linspace(0.0, length, math.ceil(length / step) + 1)
        dist = np.minimum(s[:, None] + to_vertex[u], length - s[:, None] + to_vertex[v])
        for j, x in enumerate(data.points):
            if not x.is_vertex and (x.tail, x.head) == (u, v):
                dist[:, j] = np.abs(s - x.offset)
        values = (dist**2) @ weights
        i = int(np.argmin(values))
        if values[i] < best.value:
            best = GridOptimum(tree.point_on_edge(u, v, float(s[i])), float(values[i]), step)
    return best


def tree_oracle_equivalence(instances: int, rng: np.random.Generator) -> list[CheckResult]:
    value_failures = point_failures = visit_failures = 0
    worst = 0.0
    for _ in range(instances):
        tree = random_weighted_tree(rng)
        count = int(rng.integers(1, MAX_ORACLE_POINTS + 1))
        points = tuple(random_tree_point(rng, tree) for _ in range(count))
        weights = tuple(float(w) for w in rng.uniform(0.1, 1.0, size=count))
        data = WeightedDataset(points, weights)
        trace = tree_frechet_mean_trace(tree, data)
        oracle = tree_grid_oracle(tree, data)
        excess = trace.value - oracle.value
        worst = max(worst, excess)
        value_failures += excess > ORACLE_VALUE_TOL
        point_failures += tree.distance(trace.point, oracle.point) > oracle.step + SLACK_TOL
        visit_failures += trace.visited > tree.n_vertices
    return [
        CheckResult("tree-mean/value", "tree", instances, value_failures, worst),
        CheckResult("tree-mean/argmin", "tree", instances, point_failures),
        CheckResult("tree-mean/visits", "tree", instances, visit_failures),
    ]


def worker_determinism(seed: int, workers: int) -> CheckResult:
    """The same seed gives identical risks with one worker and with ``workers`` workers."""
    space = ProductSpace.uniform(EuclideanSpace(1), 5)
    theta = ProductPoint(tuple(EuclideanPoint.of(v) for v in (0.0, 0.5, -0.5, 1.0, 2.0)))
    estimators = {
        "x": IdentityEstimator(),
        "js-zero": JamesSteinEstimator(FixedPoint(EuclideanPoint.of(0.0))),
        "js-mean": JamesSteinEstimator(AdaptiveSampleMean()),
    }
    runs = [
        mc_frequentist_risks(space, theta, GaussianGroups(), estimators, DETERMINISM_REPS, seed, w, tag="determinism")
        for w in (1, max(2, workers))
    ]
    mismatches = sum(
        (runs[0][label].mean_loss, runs[0][label].std_error) != (runs[1][label].mean_loss, runs[1][label].std_error)
        for label in estimators
    )
    return CheckResult("determinism/workers", "euclidean", len(estimators), mismatches)


def _selected(spaces: Sequence[str]) -> list[str]:
    unknown = sorted(set(spaces) - set(SPACES))
    if unknown:
        raise ExperimentError(f"Unknown space(s) {', '.join(unknown)}; choose from {', '.join(SPACES)}.")
    return list(spaces) if spaces else list(SPACES)


def run_validation(spec: ExperimentSpec) -> ExperimentResult:
    result = ExperimentResult(spec, report=Report("Property suites"))
    stream = RngStream(spec.seed).child("validate")
    results: list[CheckResult] = []
    for name in _selected(spec.spaces):
        rng = stream.child(name).generator()
        space, sample = space_samplers(rng)[name]
        suites = list(metric_axioms(space, sample, spec.cases, rng))
        if name != "circle":
            suites.append(geodesic_speed(space, sample, spec.cases, rng))
            suites.append(cat0_inequality(space, sample, spec.cases, rng))
            suites.append(pair_convexity(space, sample, spec.cases, rng))
        results.extend(replace(outcome, space=name) for outcome in suites)
        if name == "tree":
            results.extend(tree_oracle_equivalence(min(ORACLE_INSTANCES, spec.cases), rng))
        logger.info("Validated %s on %d cases", name, spec.cases)
    results.append(worker_determinism(spec.seed, spec.workers))

    for outcome in results:
        check(
            result.report,
            f"{outcome.suite} [{outcome.space}]",
            outcome.ok,
            cases=outcome.cases,
            failures=outcome.failures,
            worst=outcome.worst,
        )
    emit(result.report, "validation_summary", suites=len(results), failed=sum(not r.ok for r in results))
    return result
