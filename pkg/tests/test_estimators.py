from __future__ import annotations

import math

import numpy as np
import pytest

from geodesic_js.estimators import (
    AdaptiveSampleMean,
    EstimatorError,
    FixedPoint,
    FixedWeight,
    LowerBoundWeight,
    OracleMu,
    ScaledJamesStein,
    ShrinkageSpec,
    approximate_risk_bound,
    flat_geodesic_js,
    geodesic_js,
    js_weight,
    loss_bound,
    oracle_weight,
)
from geodesic_js.geometry.basic import CirclePoint, CircleSpace, EuclideanPoint, EuclideanSpace
from geodesic_js.geometry.core import DomainError, ProductPoint, ProductSpace
from geodesic_js.geometry.tree import ORIGIN, RegularTree

ZERO = EuclideanPoint.of(0.0)


def _line(n: int) -> ProductSpace:
    return ProductSpace.uniform(EuclideanSpace(1), n)


def _product(*values: float) -> ProductPoint:
    return ProductPoint(tuple(EuclideanPoint.of(v) for v in values))


def test_js_weight() -> None:
    assert js_weight(1.0, 4.0) == pytest.approx(0.25)
    assert js_weight(5.0, 4.0) == 1.0
    assert js_weight(1.0, 0.0) == 1.0
    with pytest.raises(DomainError):
        js_weight(-1.0, 1.0)


def test_oracle_weight() -> None:
    assert oracle_weight(1.0, 2.0, 1.0).weight == pytest.approx(0.5)
    assert oracle_weight(0.0, 1.0, 5.0).weight == 0.0
    assert oracle_weight(4.0, 1.0, 0.0).weight == 1.0

    degenerate = oracle_weight(1.0, 0.0, 0.0)
    assert degenerate.degenerate and degenerate.weight == 1.0
    with pytest.raises(DomainError):
        oracle_weight(1.0, -1.0, 0.0)


def test_approximate_risk_bound() -> None:
    assert approximate_risk_bound(1.0, 1.0) == pytest.approx(0.5)
    assert approximate_risk_bound(2.0, 0.0) == 0.0
    assert approximate_risk_bound(0.0, 0.0) == 0.0


def test_weight_mode_validation() -> None:
    with pytest.raises(EstimatorError):
        ScaledJamesStein(0.0)
    with pytest.raises(EstimatorError):
        FixedWeight(1.5)
    with pytest.raises(EstimatorError):
        LowerBoundWeight(0.0)
    with pytest.raises(EstimatorError):
        ShrinkageSpec(None, FixedPoint(ZERO))
    with pytest.raises(EstimatorError):
        ShrinkageSpec(-1.0, FixedPoint(ZERO))
    assert ShrinkageSpec(None, FixedPoint(ZERO), FixedWeight(0.3)).total_sigma2(4) == 0.0


def test_geodesic_js_on_the_line() -> None:
    estimate = geodesic_js(_line(3), _product(2.0, 0.0, -2.0), ShrinkageSpec(1.0, FixedPoint(ZERO)))

    assert estimate.weight_applied == pytest.approx(3 / 8)
    assert [float(p.coords[0]) for p in estimate.points] == pytest.approx([1.25, 0.0, -1.25])
    assert estimate.dist2 == pytest.approx(8 / 3)
    assert estimate.sigma2 == pytest.approx(1.0)


def test_geodesic_js_full_shrinkage_at_the_target() -> None:
    x = _product(1.0, 1.0)
    estimate = geodesic_js(_line(2), x, ShrinkageSpec(1.0, FixedPoint(EuclideanPoint.of(1.0))))

    assert estimate.weight_applied == 1.0
    assert _line(2).points_equal(estimate.points, estimate.shrink_point)


def test_weight_modes_scale_the_move() -> None:
    space, x = _line(3), _product(2.0, 0.0, -2.0)

    scaled = geodesic_js(space, x, ShrinkageSpec(1.0, FixedPoint(ZERO), ScaledJamesStein(0.5)))
    bounded = geodesic_js(space, x, ShrinkageSpec(None, FixedPoint(ZERO), LowerBoundWeight(0.5)))
    fixed = geodesic_js(space, x, ShrinkageSpec(None, FixedPoint(ZERO), FixedWeight(0.25)))

    assert scaled.weight_applied == pytest.approx(3 / 16)
    assert bounded.weight_applied == pytest.approx(1.5 / 8)
    assert fixed.weight_applied == 0.25


def test_per_group_variances() -> None:
    estimate = geodesic_js(_line(3), _product(2.0, 0.0, -2.0), ShrinkageSpec((0.5, 1.0, 1.5), FixedPoint(ZERO)))

    assert estimate.weight_applied == pytest.approx(3 / 8)
    with pytest.raises(EstimatorError):
        geodesic_js(_line(3), _product(2.0, 0.0, -2.0), ShrinkageSpec((1.0, 1.0), FixedPoint(ZERO)))


def test_shrink_point_modes() -> None:
    space, x = _line(2), _product(1.0, 3.0)

    adaptive = geodesic_js(space, x, ShrinkageSpec(0.0, AdaptiveSampleMean()))
    oracle = geodesic_js(space, x, ShrinkageSpec(0.0, OracleMu(_product(5.0, 5.0)), FixedWeight(0.5)))

    assert float(adaptive.shrink_point[0].coords[0]) == pytest.approx(2.0)
    assert space.points_equal(adaptive.points, x)
    assert [float(p.coords[0]) for p in oracle.points] == pytest.approx([3.0, 4.0])


def test_sample_mean_needs_identical_groups() -> None:
    space = ProductSpace((EuclideanSpace(1), CircleSpace()))
    x = ProductPoint((EuclideanPoint.of(0.0), CirclePoint(0.0)))

    with pytest.raises(DomainError):
        geodesic_js(space, x, ShrinkageSpec(1.0, AdaptiveSampleMean()))


def test_tree_groups_shrink_along_geodesics() -> None:
    tree = RegularTree()
    space = ProductSpace.uniform(tree, 2)
    x = ProductPoint((tree.vertex((0, 0)), tree.vertex((1,))))
    origin = tree.vertex(ORIGIN)

    estimate = geodesic_js(space, x, ShrinkageSpec(1.0, FixedPoint(origin)))

    assert estimate.weight_applied == pytest.approx(2 / 5)
    assert tree.distance(estimate.points[0], origin) == pytest.approx(1.2)
    assert tree.distance(estimate.points[1], origin) == pytest.approx(0.6)
    assert tree.distance(estimate.points[0], x[0]) == pytest.approx(0.8)


def test_tree_group_already_at_the_target_stays_there() -> None:
    tree = RegularTree()
    space = ProductSpace.uniform(tree, 2)
    origin = tree.vertex(ORIGIN)
    x = ProductPoint((origin, tree.vertex((0, 0, 0))))

    estimate = geodesic_js(space, x, ShrinkageSpec(1.0, FixedPoint(origin)))

    assert estimate.weight_applied == pytest.approx(2 / 9)
    assert estimate.points[0] == origin
    assert tree.distance(estimate.points[1], origin) == pytest.approx(7 / 3)


def test_loss_bound_is_exact_in_flat_space() -> None:
    space = _line(3)
    theta, x, psi = _product(0.5, 0.0, -0.5), _product(2.0, 0.0, -2.0), _product(0.0, 0.0, 0.0)
    estimate = geodesic_js(space, x, ShrinkageSpec(1.0, FixedPoint(psi)))

    result = loss_bound(space, theta, x, psi, estimate.weight_applied, estimate.sigma2)

    assert result.bound == pytest.approx(space.distance(theta, estimate.points) ** 2)
    assert result.a + result.b == pytest.approx(result.bound)
    assert result.c == 0.0


def test_loss_bound_full_shrink_term() -> None:
    space = _line(2)
    theta, x, psi = _product(1.0, 1.0), _product(0.1, 0.0), _product(0.0, 0.0)

    result = loss_bound(space, theta, x, psi, 1.0, 1.0)

    assert result.c == pytest.approx(1.0)
    assert result.bound == pytest.approx(1.0)
    assert loss_bound(space, theta, x, psi, 0.5).a is None


def test_flat_batch_agrees_with_geodesic_js() -> None:
    rng = np.random.default_rng(4)
    coords = rng.standard_normal((5, 1))
    space = _line(5)
    x = ProductPoint(tuple(EuclideanPoint(c) for c in coords))

    flat = flat_geodesic_js(coords, 0.0, 0.7)
    estimate = geodesic_js(space, x, ShrinkageSpec(0.7, FixedPoint(ZERO)))

    assert float(flat.weights) == pytest.approx(estimate.weight_applied)
    assert flat.coords[:, 0] == pytest.approx([float(p.coords[0]) for p in estimate.points])


def test_flat_batch_shapes_and_domain() -> None:
    coords = np.ones((4, 3, 2))
    result = flat_geodesic_js(coords, np.ones((3, 2)), [1.0, 1.0, 1.0])

    assert result.weights == pytest.approx([1.0] * 4)
    assert result.coords == pytest.approx(coords)
    with pytest.raises(DomainError):
        flat_geodesic_js(np.ones(3), 0.0, 1.0)
    with pytest.raises(DomainError):
        flat_geodesic_js(coords, 0.0, -1.0)
    assert math.isfinite(float(flat_geodesic_js(coords, 0.0, 0.0).weights[0]))
