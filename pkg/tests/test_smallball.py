import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmap.exceptions import ContractError, UndefinedRatioError
from gmap.measure import Ball, SpectralGaussian
from gmap.om_solver import Posterior
from gmap.potential import constant_potential, quadratic_misfit
from gmap.smallball import (CrnStream, anderson_check, ball_prob, check_variational_inequality,
                            estimate_ball_prob, explicit_anderson_check, importance_ball_prob,
                            log_ball_volume, min_cm_in_ball, ratio_crn, uniform_in_ball)

from oracles import gaussian_posterior_1d, grid_min_cm, normal_interval, sup_ball_mass


def gauss(sigma, norm="l2"):
    return SpectralGaussian(sigma, ambient_norm=norm)


# ---- projection ------------------------------------------------------------

@pytest.mark.parametrize("sigma, x, r, norm, value, h", [
    ([1.0], [0.0], 0.5, "l2", 0.0, [0.0]),
    ([1.0], [2.0], 0.5, "l2", 1.125, [1.5]),
    ([1.0, 1.0], [3.0, 4.0], 1.0, "l2", 8.0, [2.4, 3.2]),
    ([1.0, 1.0], [2.0, 0.5], 1.0, "sup", 0.5, [1.0, 0.0]),
])
def test_min_cm_in_ball_examples(sigma, x, r, norm, value, h):
    p = min_cm_in_ball(gauss(sigma, norm), Ball(x, r, norm))
    assert p.value == pytest.approx(value, abs=1e-12)
    np.testing.assert_allclose(p.minimizer, h, atol=1e-12)
    assert p.kkt_residual <= 1e-8


def test_min_cm_in_ball_anisotropic_moves_along_cheap_axis():
    p = min_cm_in_ball(gauss([1.0, 0.1]), Ball([1.0, 1.0], 1.0))
    # coordinate 2 is expensive, so the minimiser keeps it small
    assert abs(p.minimizer[1]) < abs(p.minimizer[0])
    assert p.value == pytest.approx(grid_min_cm([1.0, 0.1], [1.0, 1.0], 1.0, "l2"), abs=1e-3)


def test_norm_mismatch_is_rejected():
    with pytest.raises(ContractError):
        min_cm_in_ball(gauss([1.0]), Ball([0.0], 1.0, "sup"))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.sampled_from(["l2", "sup"]), st.integers(0, 10_000))
def test_projection_matches_grid_and_satisfies_vi(d, norm, seed):
    rng = np.random.default_rng(seed)
    sigma = rng.uniform(0.2, 2.0, d)
    x = rng.normal(0, 2, d)
    r = rng.uniform(0.05, 1.5)
    m, b = gauss(sigma, norm), Ball(x, r, norm)
    p = min_cm_in_ball(m, b)
    assert p.value <= grid_min_cm(sigma, x, r, norm, rel_step=2e-2) + 1e-12
    assert p.value == pytest.approx(grid_min_cm(sigma, x, r, norm, rel_step=2e-2), abs=5e-2)
    assert check_variational_inequality(m, b, p, 500, seed).passed


@given(st.floats(0.0, 5.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_min_value_decreases_in_radius(xv, r1, r2):
    m = gauss([1.0, 0.5])
    lo, hi = sorted((r1, r2))
    x = np.array([xv, -xv / 2])
    assert min_cm_in_ball(m, Ball(x, hi)).value <= min_cm_in_ball(m, Ball(x, lo)).value + 1e-12


def test_uniform_in_ball_stays_inside():
    b = Ball([1.0, -1.0, 0.5], 0.3)
    pts = uniform_in_ball(b, 1000, 0)
    assert np.all(np.linalg.norm(pts - b.center, axis=1) <= 0.3 + 1e-12)


@pytest.mark.parametrize("d, r, norm, expected", [
    (1, 0.5, "l2", math.log(1.0)),
    (2, 1.0, "l2", math.log(math.pi)),
    (3, 2.0, "sup", math.log(64.0)),
])
def test_log_ball_volume(d, r, norm, expected):
    assert log_ball_volume(d, r, norm) == pytest.approx(expected, rel=1e-14, abs=1e-15)


# ---- estimators --------------------------------------------------------------

def test_direct_ball_prob_origin():
    est = ball_prob(gauss([1.0]), Ball([0.0], 1.0), 1_000_000, 0)
    assert abs(est.value - 0.6826894921) <= 3 * est.stderr
    assert est.hits == round(est.value * est.n) and not est.low_confidence


def test_far_ball_direct_is_low_confidence_and_importance_is_not():
    m, b = gauss([1.0]), Ball([5.0], 0.1)
    lo = ball_prob(m, b, 10_000, 0)
    assert lo.low_confidence
    hi = importance_ball_prob(m, b, 10_000, 0)
    ref = normal_interval(4.9, 5.1)
    assert not hi.low_confidence
    assert abs(hi.value - ref) <= 3 * hi.stderr
    assert hi.stderr / hi.value < 0.02


@pytest.mark.parametrize("method", ["direct", "importance_shift", "uniform_ball"])
@pytest.mark.parametrize("d", [1, 3, 6])
def test_sup_norm_masses_against_exact_products(method, d):
    sigma = 1.0 / np.arange(1, d + 1)
    x = 0.3 * sigma
    r = 0.5 if method != "uniform_ball" else 0.1
    m = gauss(sigma, "sup")
    est = estimate_ball_prob(m, Ball(x, r, "sup"), 200_000, d, method)
    ref = sup_ball_mass(sigma, x, r)
    assert abs(est.value - ref) <= 4 * est.stderr + 1e-12


def test_posterior_direct_matches_gaussian_posterior():
    post = Posterior(gauss([1.0]), quadratic_misfit([[1.0]], [2.0], 1.0))
    mean, sd = gaussian_posterior_1d(1.0, 1.0, 2.0, 1.0)
    ref = normal_interval(0.5 - mean, 1.5 - mean, sd)
    for method in ("direct", "importance_shift", "uniform_ball"):
        est = estimate_ball_prob(post, Ball([1.0], 0.5), 200_000, 1, method)
        assert abs(est.value - ref) <= 4 * est.stderr, method


def test_constant_potential_matches_prior():
    m = gauss([1.0, 0.5])
    post = Posterior(m, constant_potential(7.0, 2))
    b = Ball([0.3, 0.1], 0.4)
    a = estimate_ball_prob(m, b, 100_000, 3, "direct")
    c = estimate_ball_prob(post, b, 100_000, 3, "direct")
    assert c.value == pytest.approx(a.value, rel=1e-12)


def test_streams_are_deterministic_and_chunk_invariant():
    m = gauss(1.0 / np.arange(1, 5))
    balls = [Ball(np.full(4, 0.2), 0.3), Ball(np.zeros(4), 0.3)]
    for method in ("direct", "importance_shift", "uniform_ball"):
        a = CrnStream(m, 150_000, 9, method).evaluate(balls)
        b = CrnStream(m, 150_000, 9, method).evaluate(balls)
        np.testing.assert_array_equal(a.log_mass, b.log_mass)
        np.testing.assert_array_equal(a.rel_se, b.rel_se)


def test_invalid_method():
    with pytest.raises(ContractError):
        CrnStream(gauss([1.0]), 10, 0, "bogus")


# ---- ratios and Anderson -------------------------------------------------------

def test_ratio_crn_identical_balls():
    b = Ball([0.5, 0.5], 0.3)
    est = ratio_crn(gauss([1.0, 1.0]), b, b, 10_000, 0)
    assert est.value == 1.0 and est.stderr == 0.0


def test_ratio_crn_undefined_denominator():
    m = gauss([1.0])
    with pytest.raises(UndefinedRatioError):
        ratio_crn(m, Ball([0.0], 0.1), Ball([50.0], 0.1), 1000, 0, method="direct")


def test_ratio_crn_shared_noise_beats_independent():
    m, n = gauss([1.0]), 100_000
    b1, b2 = Ball([0.1], 0.3), Ball([0.0], 0.3)
    crn = ratio_crn(m, b1, b2, n, 4, method="direct")
    p1, p2 = ball_prob(m, b1, n, 5), ball_prob(m, b2, n, 6)
    indep = (p1.value / p2.value) * math.hypot(p1.stderr / p1.value, p2.stderr / p2.value)
    assert crn.stderr < 0.5 * indep


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_ratio_transitivity_on_shared_stream(seed):
    m = gauss([1.0, 0.5])
    balls = [Ball([0.2, 0.1], 0.4), Ball([0.6, -0.3], 0.4), Ball([0.0, 0.0], 0.4)]
    for method in ("direct", "importance_shift"):
        t = CrnStream(m, 20_000, seed, method).evaluate(balls)
        ab, bc, ac = t.ratio(0, 1)[0], t.ratio(1, 2)[0], t.ratio(0, 2)[0]
        assert ab * bc == pytest.approx(ac, rel=1e-9)


@pytest.mark.parametrize("x, r, passes", [([0.0], 0.3, True), ([1.0], 0.3, True)])
def test_anderson_check_examples(x, r, passes):
    rep = anderson_check(gauss([1.0]), x, r, 100_000, 0)
    assert rep.passed is passes
    assert rep.ratio.value <= 1.0 + 3 * rep.ratio.stderr


def test_explicit_anderson_bound_and_value():
    m = gauss([1.0])
    rep = explicit_anderson_check(m, [2.0], 0.5, 200_000, 2)
    assert rep.bound == pytest.approx(math.exp(-1.125), rel=1e-14)
    exact = normal_interval(1.5, 2.5) / normal_interval(-0.5, 0.5)
    assert abs(rep.ratio.value - exact) <= 4 * rep.ratio.stderr
    assert rep.passed


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.sampled_from(["l2", "sup"]), st.integers(0, 10_000))
def test_explicit_anderson_property(d, norm, seed):
    rng = np.random.default_rng(seed)
    sigma = 1.0 / np.arange(1, d + 1)
    m = gauss(sigma, norm)
    x = sigma * rng.standard_normal(d) * 1.5
    rep = explicit_anderson_check(m, x, rng.uniform(0.05, 0.5), 50_000, seed)
    assert rep.passed


def test_tilted_handles_small_euclidean_balls_in_high_dimension():
    sigma = 1.0 / np.arange(1, 51)
    m = gauss(sigma)
    x = np.zeros(50)
    x[1] = 5.0
    far, origin = Ball(x, 0.1), Ball(np.zeros(50), 0.1)
    assert CrnStream(m, 20_000, 0, "importance_shift").evaluate([origin]).ess[0] < 50
    est = ratio_crn(m, far, origin, 50_000, 0)
    assert est.method == "tilted" and not est.low_confidence
    assert est.rel_stderr < 0.05
    assert math.log(est.value) <= -min_cm_in_ball(m, far).value + 3 * est.rel_stderr


@pytest.mark.parametrize("d, r", [(1, 0.5), (3, 0.3), (10, 0.5)])
def test_tilted_agrees_with_importance_shift(d, r):
    m = gauss(1.0 / np.arange(1, d + 1))
    b = Ball(np.full(d, 0.1), r)
    a = estimate_ball_prob(m, b, 200_000, 1, "tilted")
    c = estimate_ball_prob(m, b, 200_000, 1, "importance_shift")
    assert abs(a.value - c.value) <= 4 * math.hypot(a.stderr, c.stderr)


@pytest.mark.parametrize("sigma, x, r, norm, h", [
    ([1.0], [3.0], 1.0, "l2", [2.0]),
    ([1.0, 1.0], [3.0, 4.0], 1.0, "sup", [2.0, 3.0]),
])
def test_projection_closed_forms(sigma, x, r, norm, h):
    p = min_cm_in_ball(gauss(sigma, norm), Ball(x, r, norm))
    np.testing.assert_allclose(p.minimizer, h, atol=1e-12)
    assert p.value == pytest.approx(grid_min_cm(sigma, x, r, norm), abs=1e-3)


def test_projection_anisotropic_disc_matches_grid():
    p = min_cm_in_ball(gauss([2.0, 1.0]), Ball([2.0, 2.0], 1.0))
    assert p.value == pytest.approx(grid_min_cm([2.0, 1.0], [2.0, 2.0], 1.0, "l2"), abs=1e-3)
    assert np.linalg.norm(p.minimizer - [2.0, 2.0]) <= 1.0 + 1e-9


def test_vi_hand_check_and_random_d5():
    m = gauss([1.0])
    p = min_cm_in_ball(m, Ball([3.0], 1.0))
    assert 2.5 * p.minimizer[0] == pytest.approx(5.0)
    assert 2 * p.value == pytest.approx(4.0)
    rng = np.random.default_rng(5)
    for i in range(20):
        m5 = gauss(1.0 / np.arange(1, 6))
        b = Ball(rng.normal(0, 1, 5), rng.uniform(0.05, 0.5))
        assert check_variational_inequality(m5, b, min_cm_in_ball(m5, b), 1000, i).min_slack >= -1e-8


def test_ratio_crn_far_over_origin():
    est = ratio_crn(gauss([1.0]), Ball([2.0], 0.5), Ball([0.0], 0.5), 1_000_000, 0)
    exact = normal_interval(1.5, 2.5) / normal_interval(-0.5, 0.5)
    assert exact == pytest.approx(0.158, abs=5e-4)
    assert abs(est.value - exact) <= 3 * est.stderr


def test_importance_agrees_with_direct_on_far_ball():
    m, b = gauss([1.0]), Ball([3.0], 0.5)
    d, s = ball_prob(m, b, 100_000, 0), importance_ball_prob(m, b, 100_000, 0)
    assert abs(d.value - s.value) <= 3 * math.hypot(d.stderr, s.stderr)
    assert s.value == pytest.approx(0.005977, abs=3 * s.stderr + 1e-6)


def test_large_ball_has_full_mass():
    est = ball_prob(gauss([1.0, 0.5]), Ball([0.0, 0.0], 50.0), 10_000, 0)
    assert est.value == 1.0


def test_min_energy_along_shrinking_balls():
    # x_n = x* + 1/n, r_n = 1/(2n): the minimal energy approaches |x*|_E^2 / 2 from below
    m, xs = gauss([1.0]), 1.5
    gaps = []
    for n in (1, 2, 4, 8, 16, 32, 64):
        v = min_cm_in_ball(m, Ball([xs + 1.0 / n], 1.0 / (2 * n))).value
        gaps.append(0.5 * xs * xs - v)
    assert all(g <= 1e-12 for g in gaps)
    assert all(abs(b) <= abs(a) for a, b in zip(gaps, gaps[1:]))
    assert abs(gaps[-1]) < 0.02


def test_anderson_d10_and_explicit_d5_trials():
    rng = np.random.default_rng(10)
    m10 = gauss(1.0 / np.arange(1, 11))
    for i in range(50):
        assert anderson_check(m10, m10.sigma * rng.standard_normal(10), 0.5, 20_000, i).passed
    m5 = gauss(1.0 / np.arange(1, 6))
    for i in range(20):
        rep = explicit_anderson_check(m5, m5.sigma * rng.standard_normal(5) * 1.5,
                                      rng.uniform(0.05, 0.5), 20_000, i)
        assert rep.passed
