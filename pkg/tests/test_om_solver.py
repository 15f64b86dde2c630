import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmap.exceptions import ContractError, NumericalWarning
from gmap.measure import SpectralGaussian
from gmap.om_solver import (Posterior, minimize_om, om_gradient, om_ratio_prediction,
                            om_value)
from gmap.potential import (Potential, cubic_misfit, finite_difference_gradient,
                            quadratic_misfit, relative_error, unbounded_below_example,
                            zero_potential)

from oracles import linear_gaussian_map


def post_1d(y=2.0):
    return Posterior(SpectralGaussian([1.0]), quadratic_misfit([[1.0]], [y], 1.0))


def test_om_value_examples():
    assert om_value(Posterior(SpectralGaussian([1.0]), zero_potential(1)), [0.0]) == 0.0
    assert om_value(post_1d(), [1.0]) == 1.0


def test_om_value_is_additive():
    post = Posterior(SpectralGaussian([1.0, 0.5]), cubic_misfit([1.0, 0.0]))
    u = np.array([0.3, -0.7])
    assert om_value(post, u) == 0.5 * (0.09 + 0.49 / 0.25) + post.potential(u)


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ContractError):
        Posterior(SpectralGaussian([1.0]), quadratic_misfit(np.eye(2), [0.0, 0.0], 1.0))


def test_om_ratio_prediction_examples():
    post = Posterior(SpectralGaussian([1.0]), zero_potential(1))
    assert om_ratio_prediction(post, [0.3], [0.3]) == 1.0
    assert om_ratio_prediction(post, [0.0], [1.0]) == pytest.approx(math.exp(0.5), rel=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_om_ratio_reciprocity(a, b):
    post = post_1d()
    prod = om_ratio_prediction(post, [a], [b]) * om_ratio_prediction(post, [b], [a])
    assert prod == pytest.approx(1.0, rel=1e-12)


def test_om_ratio_prediction_overflow_is_flagged():
    post = Posterior(SpectralGaussian([0.01]), zero_potential(1))
    with pytest.warns(NumericalWarning):
        assert om_ratio_prediction(post, [0.0], [1.0]) == np.finfo(float).max


def test_om_gradient_examples():
    post = Posterior(SpectralGaussian([1.0, 2.0]), quadratic_misfit(np.eye(2), [0.0, 0.0], 1.0))
    np.testing.assert_array_equal(om_gradient(post, np.zeros(2)), [0.0, 0.0])
    np.testing.assert_allclose(om_gradient(post_1d(), [1.0]), [0.0], atol=1e-15)


@pytest.mark.parametrize("post", [
    post_1d(),
    Posterior(SpectralGaussian.power_law(4), cubic_misfit([1.0, -0.5, 0.2, 0.0], 0.3)),
    Posterior(SpectralGaussian([1.0, 1.0]), unbounded_below_example(1.0)),
])
def test_om_gradient_matches_finite_differences(post):
    pts = np.random.default_rng(1).standard_normal((100, post.dim))
    worst = max(relative_error(om_gradient(post, u),
                               finite_difference_gradient(lambda v: om_value(post, v), u))
                for u in pts)
    assert worst <= 1e-4


@pytest.mark.parametrize("sigma, y, expected", [
    ([1.0], [2.0], [1.0]),
    ([1.0, 0.5], [1.0, 1.0], [0.5, 0.2]),
])
def test_minimize_om_closed_forms(sigma, y, expected):
    post = Posterior(SpectralGaussian(sigma), quadratic_misfit(np.eye(len(y)), y, 1.0))
    res = minimize_om(post)
    assert res.converged
    np.testing.assert_allclose(res.minimizer, expected, atol=1e-6)


def test_minimize_om_prior_only():
    res = minimize_om(Posterior(SpectralGaussian.power_law(6), zero_potential(6)))
    np.testing.assert_allclose(res.minimizer, 0.0, atol=1e-9)


@pytest.mark.parametrize("dim, rows", [(2, 2), (10, 5), (50, 50), (100, 60)])
def test_minimize_om_random_linear_problems(dim, rows):
    rng = np.random.default_rng(dim)
    m = SpectralGaussian.power_law(dim)
    G, y = rng.standard_normal((rows, dim)), rng.standard_normal(rows)
    res = minimize_om(Posterior(m, quadratic_misfit(G, y, 1.0)), seed=dim)
    assert res.converged
    assert np.max(np.abs(res.minimizer - linear_gaussian_map(m.sigma, G, y))) <= 1e-6
    assert len(res.multistart_values) == 4


def test_history_is_monotone():
    post = Posterior(SpectralGaussian([1.0, 1.0]), cubic_misfit([1.0, 0.5], 0.3))
    h = np.array(minimize_om(post).history)
    assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[1:])))


def test_non_convergence_is_reported():
    post = Posterior(SpectralGaussian([1.0]), cubic_misfit([1.0], 0.3))
    res = minimize_om(post, max_iter=1, starts=[np.array([2.0])])
    assert not res.converged and "max_iter" in res.message


def test_non_coercive_problem_is_flagged():
    # Phi = -|u|^4 dominates the prior, so descent runs away
    p = Potential(lambda x: -float(x @ x) ** 2, lambda x: -4 * float(x @ x) * x)
    res = minimize_om(Posterior(SpectralGaussian([1.0]), p), starts=[np.array([2.0])])
    assert not res.converged


def test_deterministic_given_seed():
    post = Posterior(SpectralGaussian.power_law(3), cubic_misfit([1.0, 0.2, -0.3], 0.5))
    a, b = minimize_om(post, seed=5), minimize_om(post, seed=5)
    np.testing.assert_array_equal(a.minimizer, b.minimizer)
    assert a.multistart_values == b.multistart_values


def test_tie_break_prefers_smaller_cm_norm():
    # symmetric double well: both minima tie, so the lower CM norm (equal here) keeps the first
    post = Posterior(SpectralGaussian([1.0]), cubic_misfit([0.0], 1.0))
    res = minimize_om(post, starts=[np.array([0.5]), np.array([-0.5])])
    assert res.converged
    np.testing.assert_allclose(res.minimizer, [0.0], atol=1e-6)


def test_d100_runtime():
    rng = np.random.default_rng(100)
    m = SpectralGaussian.power_law(100)
    post = Posterior(m, quadratic_misfit(rng.standard_normal((100, 100)),
                                         rng.standard_normal(100), 1.0))
    t0 = time.perf_counter()
    res = minimize_om(post)
    assert time.perf_counter() - t0 < 1.0
    assert res.converged
