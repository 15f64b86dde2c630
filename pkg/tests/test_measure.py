import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gmap.exceptions import ContractError, NumericalWarning
from gmap.measure import (AnalyticMeasure1D, Ball, SpectralGaussian, cm_inner, cm_norm_sq,
                          cm_shift_density, exact_ball_prob_1d, gaussian_interval_mass,
                          log_cm_shift_density, rkhs_coefficients, sample)

from oracles import normal_interval

sigmas = arrays(np.float64, st.integers(1, 6), elements=st.floats(0.05, 5.0))


def test_nondegeneracy_is_enforced():
    with pytest.raises(ContractError, match="nondegenerate"):
        SpectralGaussian([1.0, 0.0])
    with pytest.raises(ContractError):
        SpectralGaussian([1.0, -2.0])
    with pytest.raises(ContractError):
        SpectralGaussian([1.0], ambient_norm="l1")


def test_sigma_is_read_only():
    m = SpectralGaussian([1.0, 2.0])
    with pytest.raises(ValueError):
        m.sigma[0] = 3.0


def test_power_law():
    m = SpectralGaussian.power_law(4, decay=1.0, scale=2.0)
    np.testing.assert_allclose(m.sigma, [2.0, 1.0, 2 / 3, 0.5])


@pytest.mark.parametrize("sigma, h, expected", [
    ([1.0], [0.0], 0.0),
    ([1.0, 0.5], [1.0, 1.0], 5.0),
    ([2.0, 1.0, 0.1], [2.0, -1.0, 0.1], 3.0),
])
def test_cm_norm_sq_examples(sigma, h, expected):
    assert cm_norm_sq(SpectralGaussian(sigma), np.array(h)) == pytest.approx(expected, rel=1e-15)


def test_cm_norm_sq_sign_symmetry():
    m = SpectralGaussian([1.0, 1.0])
    assert cm_norm_sq(m, np.array([3.0, 4.0])) == cm_norm_sq(m, np.array([-3.0, 4.0])) == 25.0


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        cm_norm_sq(SpectralGaussian([1.0, 1.0]), np.ones(3))
    with pytest.raises(ContractError):
        rkhs_coefficients(SpectralGaussian([1.0]), np.ones(2))


def test_rkhs_coefficients_examples():
    m = SpectralGaussian([2.0])
    np.testing.assert_array_equal(rkhs_coefficients(m, np.array([4.0])), [1.0])
    np.testing.assert_array_equal(rkhs_coefficients(m, np.zeros(1)), [0.0])


@given(sigmas, st.data())
def test_rkhs_round_trip(sigma, data):
    m = SpectralGaussian(sigma)
    h = data.draw(arrays(np.float64, sigma.size, elements=st.floats(-10, 10)))
    g = rkhs_coefficients(m, h)
    assert float(g @ h) == pytest.approx(float(cm_norm_sq(m, h)), rel=1e-12, abs=1e-300)


@given(sigmas, st.data())
def test_embedding_constant_bounds_both_norms(sigma, data):
    m = SpectralGaussian(sigma)
    h = data.draw(arrays(np.float64, sigma.size, elements=st.floats(-10, 10)))
    # hypot scales, so tiny h does not underflow as the squared norm does
    e = math.hypot(*(h / m.sigma))
    assert e * e == pytest.approx(float(cm_norm_sq(m, h)), rel=1e-12, abs=1e-300)
    c = m.embedding_constant
    assert math.hypot(*h) <= c * e * (1 + 1e-12) + 1e-300
    assert np.max(np.abs(h)) <= c * e * (1 + 1e-12) + 1e-300


def test_cm_shift_density_examples():
    m = SpectralGaussian([1.0])
    assert cm_shift_density(m, np.zeros(1), np.array([3.7])) == 1.0
    assert cm_shift_density(m, np.ones(1), np.ones(1)) == pytest.approx(math.exp(0.5), rel=1e-15)


def test_cm_shift_density_saturates_with_warning():
    m = SpectralGaussian([1.0])
    with pytest.warns(NumericalWarning):
        v = cm_shift_density(m, np.array([40.0]), np.array([40.0]))
    assert v == np.finfo(float).max


def test_cm_shift_density_integrates_to_one():
    m = SpectralGaussian([1.0, 0.5])
    h = np.array([0.3, -0.2])
    w = cm_shift_density(m, h, sample(m, 3, 200_000))
    assert abs(w.mean() - 1.0) <= 3 * w.std() / math.sqrt(w.size)


def test_log_shift_density_matches_gaussian_ratio():
    m = SpectralGaussian([1.0, 2.0])
    h, x = np.array([0.5, -1.0]), np.array([0.2, 0.7])
    ref = m.log_density(x - h) - m.log_density(x)
    assert log_cm_shift_density(m, h, x) == pytest.approx(ref, rel=1e-12)


def test_sample_variance_and_correlation():
    x = sample(SpectralGaussian([1.0]), 0, 100_000)
    assert 0.97 <= x.var() <= 1.03
    y = sample(SpectralGaussian([1.0, 0.5]), 1, 100_000)
    assert abs(np.corrcoef(y.T)[0, 1]) < 0.01
    assert y[:, 1].std() == pytest.approx(0.5, rel=0.01)


def test_sample_is_deterministic():
    m = SpectralGaussian.power_law(5)
    np.testing.assert_array_equal(sample(m, 42, 10), sample(m, 42, 10))


@pytest.mark.parametrize("lo, hi", [(-1, 1), (2.5, 3.5), (-40, -30), (8, 9), (-0.1, 50), (30, 31)])
def test_gaussian_interval_mass_is_tail_accurate(lo, hi):
    ref = normal_interval(lo, hi)
    got = gaussian_interval_mass(lo, hi)
    assert abs(got - ref) <= 1e-12
    if ref > 0:
        assert got == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("measure, center, radius, expected", [
    (AnalyticMeasure1D.gaussian(), 0.0, 1.0, 0.6826894921370859),
    (AnalyticMeasure1D.uniform_unit(), 0.5, 0.2, 0.4),
    (AnalyticMeasure1D.uniform_unit(), 0.0, 0.2, 0.2),
    (AnalyticMeasure1D.uniform_unit(), 2.0, 0.5, 0.0),
    (AnalyticMeasure1D.uniform_unit(), 0.5, 3.0, 1.0),
])
def test_exact_ball_prob_1d(measure, center, radius, expected):
    got = exact_ball_prob_1d(measure, Ball([center], radius))
    assert got == pytest.approx(expected, abs=1e-12)


def test_ball_validation():
    with pytest.raises(ContractError):
        Ball([0.0], 0.0)
    with pytest.raises(ContractError):
        Ball([np.nan], 1.0)
    b = Ball([0.0, 0.0], 1.0, "sup")
    assert b.contains([1.0, -1.0]) and not b.contains([1.0, 1.01])


def test_cm_inner_is_bilinear():
    m = SpectralGaussian([1.0, 0.5])
    a, b = np.array([1.0, 2.0]), np.array([-1.0, 0.5])
    assert cm_inner(m, a, b) == pytest.approx(-1.0 + 1.0 / 0.25, rel=1e-15)
    assert cm_inner(m, a, a) == pytest.approx(cm_norm_sq(m, a))
