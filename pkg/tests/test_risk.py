from __future__ import annotations

import math

import pytest

from geodesic_js.estimators import FixedPoint, FixedWeight, OracleMu, oracle_weight
from geodesic_js.geometry.basic import EuclideanPoint, EuclideanSpace
from geodesic_js.geometry.core import DomainError, ProductPoint, ProductSpace
from geodesic_js.geometry.tree import ORIGIN, RegularTree
from geodesic_js.harness.risk import (
    ClassicalJsEstimator,
    ConstantEstimator,
    DegenerateGroups,
    GaussianGroups,
    IdentityEstimator,
    JamesSteinEstimator,
    LazyWalkGroups,
    LazyWalkPrior,
    RiskEstimate,
    mc_bayes_risks,
    mc_frequentist_risk,
    mc_frequentist_risks,
    run_replicates,
)
from geodesic_js.samplers import walk_distance_distribution

ZERO = EuclideanPoint.of(0.0)


def _gaussian_setup(n: int, value: float = 0.0) -> tuple[ProductSpace, ProductPoint]:
    return ProductSpace.uniform(EuclideanSpace(1), n), ProductPoint((EuclideanPoint.of(value),) * n)


def _within(estimate: RiskEstimate, expected: float, sigmas: float = 4.0) -> bool:
    return abs(estimate.mean_loss - expected) <= sigmas * estimate.std_error


def test_risk_estimate_from_losses() -> None:
    estimate = RiskEstimate.from_losses([1.0, 2.0, 3.0], seed=7, metadata={"n": 3})

    assert estimate.mean_loss == pytest.approx(2.0)
    assert estimate.std_error == pytest.approx(math.sqrt(1 / 3))
    assert estimate.replicates == 3
    assert estimate.metadata == {"n": 3}
    assert RiskEstimate.from_losses([5.0], seed=0).std_error == 0.0
    with pytest.raises(DomainError):
        RiskEstimate.from_losses([], seed=0)


def test_scaled_estimate() -> None:
    estimate = RiskEstimate.from_losses([1.0, 3.0], seed=1).scaled(0.5)

    assert estimate.mean_loss == pytest.approx(1.0)
    assert estimate.std_error == pytest.approx(0.5)


def test_identity_risk_equals_the_noise_variance() -> None:
    space, theta = _gaussian_setup(5, value=2.0)

    estimate = mc_frequentist_risk(space, theta, GaussianGroups(), IdentityEstimator(), reps=2000, seed=11)

    assert _within(estimate, 1.0)
    assert estimate.metadata["n"] == 5


def test_degenerate_noise_has_zero_risk() -> None:
    space, theta = _gaussian_setup(4, value=1.0)
    estimators = {"x": IdentityEstimator(), "js": JamesSteinEstimator(FixedPoint(ZERO))}

    risks = mc_frequentist_risks(space, theta, DegenerateGroups(), estimators, reps=10, seed=3)

    assert risks["x"].mean_loss == 0.0
    assert risks["js"].mean_loss == pytest.approx(0.0)


def test_classical_stein_risk_at_the_target() -> None:
    space, theta = _gaussian_setup(10)
    estimators = {"x": IdentityEstimator(), "stein": ClassicalJsEstimator()}

    risks = mc_frequentist_risks(space, theta, GaussianGroups(), estimators, reps=4000, seed=5)

    assert _within(risks["stein"], 0.2)
    assert risks["stein"].mean_loss < risks["x"].mean_loss


def test_geodesic_js_beats_identity_near_the_target() -> None:
    space, theta = _gaussian_setup(20, value=0.3)
    estimators = {"x": IdentityEstimator(), "js": JamesSteinEstimator(FixedPoint(ZERO))}

    risks = mc_frequentist_risks(space, theta, GaussianGroups(), estimators, reps=2000, seed=9)

    assert risks["js"].mean_loss < risks["x"].mean_loss
    assert risks["js"].bound_violations == 0


def test_replicates_need_a_positive_count() -> None:
    space, theta = _gaussian_setup(2)

    with pytest.raises(DomainError):
        mc_frequentist_risk(space, theta, GaussianGroups(), IdentityEstimator(), reps=0, seed=0)


def test_results_do_not_depend_on_worker_count() -> None:
    space, theta = _gaussian_setup(3)
    estimators = {"x": IdentityEstimator(), "js": JamesSteinEstimator(FixedPoint(ZERO))}

    serial = mc_frequentist_risks(space, theta, GaussianGroups(), estimators, reps=600, seed=21, workers=1)
    parallel = mc_frequentist_risks(space, theta, GaussianGroups(), estimators, reps=600, seed=21, workers=2)

    for label in estimators:
        assert serial[label].mean_loss == parallel[label].mean_loss
        assert serial[label].std_error == parallel[label].std_error


def test_replicate_streams_follow_the_tag() -> None:
    def task(rng):
        from geodesic_js.harness.risk import Outcome

        return Outcome({"u": float(rng.random())})

    first = run_replicates(task, 3, seed=1, tag="a")
    again = run_replicates(task, 3, seed=1, tag="a")
    other = run_replicates(task, 3, seed=1, tag="b")

    assert [o.losses for o in first] == [o.losses for o in again]
    assert [o.losses for o in first] != [o.losses for o in other]


def test_tree_bayes_risks() -> None:
    tree = RegularTree()
    space = ProductSpace.uniform(tree, 5)
    origin = tree.vertex(ORIGIN)
    sigma2 = walk_distance_distribution(2).second_moment()
    rho_x = walk_distance_distribution(4).second_moment()
    weight = oracle_weight(sigma2, rho_x, sigma2).weight
    estimators = {
        "x": IdentityEstimator(),
        "origin": ConstantEstimator(origin),
        "oracle": JamesSteinEstimator(OracleMu(origin), FixedWeight(weight)),
        "js": JamesSteinEstimator(FixedPoint(origin)),
    }

    risks = mc_bayes_risks(space, LazyWalkPrior(2, 5), LazyWalkGroups(2), estimators, reps=1500, seed=13)

    assert weight == pytest.approx(0.5)
    assert _within(risks["x"], sigma2)
    assert _within(risks["origin"], sigma2)
    for label in ("oracle", "js"):
        assert risks[label].bound_violations == 0
    oracle = risks["oracle"]
    assert oracle.mean_loss + 4 * oracle.std_error < min(risks["x"].mean_loss, risks["origin"].mean_loss)
