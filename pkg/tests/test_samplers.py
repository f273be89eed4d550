from __future__ import annotations

import math

import numpy as np
import pytest

from geodesic_js import samplers
from geodesic_js.geometry.core import DomainError, NearSingularError
from geodesic_js.geometry.spd import SpdPoint, factor_log, matrix_log
from geodesic_js.geometry.tree import check_word
from geodesic_js.samplers import (
    RngStream,
    conditional_draws,
    lazy_walk_3regular,
    sample_gaussian,
    sample_spd_prior,
    sample_wishart,
    sample_wishart_matrices,
    spd_conditional_moments,
    spd_prior_moments,
    tag_key,
    walk_distance_distribution,
    wishart_logs,
)


def _rng(seed: int = 0) -> np.random.Generator:
    return RngStream(seed).generator()


def test_streams_are_reproducible_and_independent() -> None:
    a = RngStream(42, (1, 2)).generator().random(4)
    b = RngStream(42, (1, 2)).generator().random(4)
    c = RngStream(42, (1, 3)).generator().random(4)

    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(42).child("table1", 5) == RngStream(42, (tag_key("table1"), 5))


def test_tag_keys_are_stable() -> None:
    assert tag_key("bayes") == tag_key("bayes")
    assert tag_key("bayes") != tag_key("frequentist")
    assert 0 <= tag_key("bayes") < 2**64


def test_sample_gaussian_domain() -> None:
    assert sample_gaussian(3, 1.0, 0.0, _rng()) == pytest.approx([1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        sample_gaussian(0, 0.0, 1.0, _rng())
    with pytest.raises(DomainError):
        sample_gaussian(2, 0.0, -1.0, _rng())


def test_walk_distribution_two_steps() -> None:
    law = walk_distance_distribution(2)

    assert law.probs == pytest.approx([0.25, 0.375, 0.375])
    assert law.second_moment() == pytest.approx(1.875)
    assert law.mean() == pytest.approx(1.125)


def test_walk_distribution_is_a_probability_law() -> None:
    laws = [walk_distance_distribution(k) for k in (0, 1, 15, 45)]

    assert laws[0].probs == pytest.approx([1.0])
    assert laws[1].probs == pytest.approx([0.25, 0.75])
    for law in laws:
        assert math.fsum(law.probs) == pytest.approx(1.0)
        assert np.all(law.probs >= 0)
    assert laws[2].second_moment() < laws[3].second_moment()
    with pytest.raises(DomainError):
        walk_distance_distribution(-1)


def test_lazy_walk_agrees_with_distance_law() -> None:
    rng = _rng(5)
    steps = 6
    distances = np.array([len(lazy_walk_3regular((), steps, rng)) for _ in range(4000)], dtype=float)
    sq = distances**2
    se = sq.std(ddof=1) / math.sqrt(sq.size)

    assert abs(sq.mean() - walk_distance_distribution(steps).second_moment()) <= 4 * se


def test_two_stage_walk_matches_the_combined_distance_law() -> None:
    rng = _rng(13)
    k_tau2, k_sigma2 = 3, 2
    lengths = []
    for _ in range(4000):
        theta = lazy_walk_3regular((), k_tau2, rng)
        lengths.append(len(lazy_walk_3regular(theta, k_sigma2, rng)))
    d = np.array(lengths, dtype=float)
    law = walk_distance_distribution(k_tau2 + k_sigma2)

    assert abs(d.mean() - law.mean()) <= 3 * d.std(ddof=1) / math.sqrt(d.size)
    assert abs((d**2).mean() - law.second_moment()) <= 3 * (d**2).std(ddof=1) / math.sqrt(d.size)


def test_lazy_walk_produces_valid_words() -> None:
    rng = _rng(9)
    for _ in range(200):
        word = lazy_walk_3regular((1, 0), 10, rng)
        check_word(word)
    assert lazy_walk_3regular((0, 1), 0, rng) == (0, 1)
    with pytest.raises(DomainError):
        lazy_walk_3regular((), -1, rng)


def test_wishart_mean_and_shape() -> None:
    scale = np.array([[2.0, 0.5], [0.5, 1.0]])
    draws = sample_wishart_matrices(scale, 5, (20_000,), _rng(1))

    assert draws.shape == (20_000, 2, 2)
    assert np.allclose(draws, np.swapaxes(draws, -1, -2))
    assert draws.mean(axis=0) == pytest.approx(5 * scale, rel=0.05, abs=0.05)


def test_wishart_stacked_scales() -> None:
    scales = np.stack([np.eye(3), 4.0 * np.eye(3)])
    draws = sample_wishart_matrices(scales, 3, (7,), _rng(2))

    assert draws.shape == (7, 2, 3, 3)


def test_wishart_large_dof_uses_gamma_branch() -> None:
    draws = sample_wishart_matrices(np.eye(1), 400, (2000,), _rng(4))[:, 0, 0]
    se = draws.std(ddof=1) / math.sqrt(draws.size)

    assert abs(draws.mean() - 400.0) <= 4 * se


def test_wishart_domain() -> None:
    with pytest.raises(DomainError):
        sample_wishart_matrices(np.eye(3), 2, (1,), _rng())
    with pytest.raises(DomainError):
        sample_wishart_matrices(np.diag([1.0, -1.0]), 3, (1,), _rng())
    point = sample_wishart(SpdPoint.identity(2), 4, _rng())
    assert point.k == 2


def test_conditional_draws_shape() -> None:
    psi = sample_spd_prior(3, (4,), _rng(6))
    logs = conditional_draws(psi, 2, (5,), _rng(7))

    assert psi.shape == (4, 3, 3)
    assert logs.shape == (5, 4, 3, 3)
    assert np.allclose(logs, np.swapaxes(logs, -1, -2))


def test_conditional_moments_are_isotropic_at_identity() -> None:
    moments = spd_conditional_moments(SpdPoint.identity(3), 0, 10_000, _rng(8))
    off_diagonal = moments.theta.log[~np.eye(3, dtype=bool)]

    assert moments.sigma2 > 0
    assert np.all(np.abs(off_diagonal) < 0.05)
    assert moments.theta_se == pytest.approx(math.sqrt(moments.sigma2 / 10_000))


def test_conditional_moments_concentrate_with_alpha() -> None:
    loose = spd_conditional_moments(SpdPoint.identity(3), 0, 10_000, _rng(10))
    tight = spd_conditional_moments(SpdPoint.identity(3), 8, 10_000, _rng(11))

    assert tight.sigma2 < loose.sigma2


def test_conditional_moments_domain() -> None:
    with pytest.raises(DomainError):
        spd_conditional_moments(SpdPoint.identity(3), 0, 100, _rng())
    with pytest.raises(DomainError):
        spd_conditional_moments(SpdPoint.identity(3), -1, 10_000, _rng())


def test_prior_moments_split_the_marginal_spread() -> None:
    moments = spd_prior_moments(3, 2, 3, 10_000, _rng(12))

    assert moments.sigma2 > 0
    assert moments.tau2 >= 0
    assert moments.tau2 == pytest.approx(max(moments.rho_x_mu2 - moments.sigma2, 0.0))
    assert moments.mu.k == 3
    with pytest.raises(DomainError):
        spd_prior_moments(3, 2, 1, 10_000, _rng())


def test_wishart_logs_agree_with_the_formed_matrices() -> None:
    logs = wishart_logs(np.eye(2), 5, (50,), _rng(14))
    mats = sample_wishart_matrices(np.eye(2), 5, (50,), _rng(14))

    assert logs == pytest.approx(matrix_log(mats), abs=1e-9)


def test_wishart_logs_keep_tiny_eigenvalues() -> None:
    factor = np.diag([1.0, 1e-9, 2.0])
    logs = wishart_logs(factor, 3, (200,), _rng(15))

    assert np.all(np.isfinite(logs))
    assert np.all(np.linalg.eigvalsh(logs).min(axis=-1) < math.log(1e-14))
    with pytest.raises(NearSingularError):
        wishart_logs(np.diag([1.0, 0.0, 1.0]), 3, (1,), _rng())


def test_singular_draws_are_redrawn(monkeypatch: pytest.MonkeyPatch) -> None:
    calls = {"n": 0}
    real = samplers.near_singular_factors

    def flag_first_draw(f: np.ndarray) -> np.ndarray:
        mask = real(f)
        calls["n"] += 1
        if calls["n"] == 2:
            mask = mask.copy()
            mask.flat[0] = True
        return mask

    monkeypatch.setattr(samplers, "near_singular_factors", flag_first_draw)
    logs = wishart_logs(np.eye(3), 3, (4,), _rng(16))

    assert calls["n"] == 3
    assert logs.shape == (4, 3, 3)
    assert np.all(np.isfinite(logs))


def test_default_size_conditional_draws_stay_finite() -> None:
    rng = _rng(17)
    psi = sample_spd_prior(3, (10,), rng)
    logs = conditional_draws(psi, 0, (20_000,), rng)

    assert logs.shape == (20_000, 10, 3, 3)
    assert np.all(np.isfinite(logs))
    oracle = spd_conditional_moments(SpdPoint.from_log(factor_log(psi[0])), 0, 20_000, rng)
    assert oracle.sigma2 > 0
