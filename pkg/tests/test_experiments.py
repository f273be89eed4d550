from __future__ import annotations

import math

import pytest
from pydantic import ValidationError

from geodesic_js.harness.experiments import (
    EXPERIMENT_DEFAULTS,
    ExperimentSpec,
    identity_scale,
    psi_word,
    run_spd_bayes,
    run_spd_freq,
    run_table1,
)
from geodesic_js.harness.report import ExperimentError


def _within(row, expected: float) -> bool:
    return abs(row.mean_loss - expected) <= max(0.03, 4 * row.std_error)


def test_experiment_defaults() -> None:
    spec = ExperimentSpec.for_experiment("spd-bayes")

    assert spec.reps == 1_000
    assert spec.n_values == EXPERIMENT_DEFAULTS["spd-bayes"]["n_values"]
    assert spec.oracle_reps == 10_000
    assert ExperimentSpec.for_experiment("table1").reps == 20_000
    assert ExperimentSpec.for_experiment("table1", reps=50).reps == 50
    assert ExperimentSpec.for_experiment("demo-tripod").k_tau == 15


@pytest.mark.parametrize(
    "overrides",
    [
        {"reps": 0},
        {"oracle_reps": 100},
        {"seed": -1},
        {"n_values": []},
        {"k_sigma": [0]},
        {"alphas": [-1]},
        {"t_grid": [1.5]},
        {"shrink_points": ["median"]},
        {"shrink_points": ["0I"]},
        {"colour": "blue"},
    ],
)
def test_experiment_spec_rejects_bad_values(overrides: dict) -> None:
    with pytest.raises(ValidationError):
        ExperimentSpec.for_experiment("spd-bayes", **overrides)


def test_identity_scale_labels() -> None:
    assert identity_scale("10I") == 10.0
    assert identity_scale("0.1I") == pytest.approx(0.1)
    assert identity_scale("I") == 1.0
    assert identity_scale("xbar") is None
    assert psi_word(3) == (0, 0, 0)
    assert psi_word(0) == ()


# Ratios at psi = mu measured at 4000 replicates with the default seed.
TREE_RATIOS_AT_MU = {1: 0.954, 15: 0.417, 30: 0.264}


def test_table1_spot_cells() -> None:
    spec = ExperimentSpec.for_experiment("table1", reps=4_000, k_sigma=sorted(TREE_RATIOS_AT_MU), psi_distances=[0])

    result = run_table1(spec)
    rows = {(row.alpha_or_ksigma, row.shrink_point): row for row in result.rows}

    assert {label for _, label in rows} == {"d=0", "xbar", "mu"}
    assert rows[15, "mu"].estimator == "oracle"
    for k_sigma, expected in TREE_RATIOS_AT_MU.items():
        assert _within(rows[k_sigma, "d=0"], expected)
    assert rows[15, "mu"].mean_loss < rows[15, "d=0"].mean_loss
    assert all(row.mean_loss > 0.0 for row in result.rows)
    assert result.report.passed
    assert all(row.n == 2 for row in result.rows)


def test_table1_is_reproducible() -> None:
    spec = ExperimentSpec.for_experiment("table1", reps=300, k_sigma=[1], psi_distances=[32])

    first = run_table1(spec)
    second = run_table1(spec)

    assert first.rows == second.rows


def test_spd_bayes_small_run() -> None:
    spec = ExperimentSpec.for_experiment(
        "spd-bayes",
        reps=20,
        k=2,
        alphas=[2],
        n_values=[2, 3],
        shrink_points=["I", "xbar", "mu", "best"],
        inner_reps=10,
        ghost_reps=10,
        pilot_reps=2,
    )

    result = run_spd_bayes(spec)

    assert len(result.rows) == 2 * 5
    estimators = {(row.shrink_point, row.estimator) for row in result.rows}
    assert estimators == {("-", "x"), ("I", "js"), ("xbar", "js"), ("mu", "js"), ("mu", "oracle")}
    assert all(row.replicates == 20 for row in result.rows)
    [event] = [e for e in result.report.events if e.kind == "spd_bayes"]
    assert event.data["ratios"]["2|x"] == pytest.approx(1.0)
    assert 0.0 <= event.data["best_weight"] <= 1.0


def test_spd_freq_small_run() -> None:
    spec = ExperimentSpec.for_experiment(
        "spd-freq", reps=5, k=2, n_values=[1, 3], shrink_points=["10I", "xbar"], psi_draws=4
    )

    result = run_spd_freq(spec)

    risks = [row for row in result.rows if row.estimator != "proportion"]
    shares = [row for row in result.rows if row.estimator == "proportion"]
    assert len(risks) == 2 * 3
    assert len(shares) == 2 * 2
    assert all(0.0 <= row.mean_loss <= 1.0 for row in shares)
    assert all(row.replicates == 4 for row in shares)
    # one group is its own sample mean, so xbar never beats X at n = 1
    assert next(r for r in shares if r.n == 1 and r.shrink_point == "xbar").mean_loss == 0.0


def test_spd_freq_needs_a_comparable_shrinkage_point() -> None:
    spec = ExperimentSpec.for_experiment("spd-freq", shrink_points=["mu", "best"])

    with pytest.raises(ExperimentError):
        run_spd_freq(spec)


def test_spd_runs_at_three_by_three_matrices() -> None:
    bayes = run_spd_bayes(
        ExperimentSpec.for_experiment(
            "spd-bayes", reps=10, alphas=[0], n_values=[2, 5], oracle_reps=10_000, pilot_reps=2
        )
    )
    freq = run_spd_freq(
        ExperimentSpec.for_experiment(
            "spd-freq", reps=20, n_values=[2, 3], shrink_points=["I", "xbar"], psi_draws=3, oracle_reps=10_000
        )
    )

    assert bayes.spec.k == freq.spec.k == 3
    assert bayes.rows and freq.rows
    assert all(math.isfinite(row.mean_loss) for row in bayes.rows + freq.rows)
