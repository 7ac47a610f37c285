import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrexciton.errors import (
    ParameterDomainError,
    SingularityError,
    SumDivergenceError,
    UnsupportedRegimeError,
)
from lrexciton.model_core import (
    ModelParams,
    RegimeTag,
    asymptotic_gap,
    classify_regime,
    coupling,
    fractional_coefficient,
    gap_expansion,
    kernel_K,
    lattice_dispersion,
    lattice_dispersion_at_zero,
    quadratic_coefficient,
    spectral_gap,
)
from lrexciton.spectral_ops import SpectralGrid


def polylog_gap(k, s, J=1.0):
    """2J (zeta(s) - Re Li_s(e^{ik})) at 30 digits, independent of the lattice-sum code."""
    with mpmath.workdps(30):
        return float(2 * J * (mpmath.zeta(s) - mpmath.re(mpmath.polylog(s, mpmath.expj(k)))))


def brute_cos_sum(k, s, terms=10**6):
    n = np.arange(1, terms + 1, dtype=float)
    head = np.sum(np.cos(k * n) / n**s)
    return 2 * head


# -- parameters -----------------------------------------------------------------


def test_params_reject_nonpositive_constants():
    with pytest.raises(ParameterDomainError):
        ModelParams(mass=0.0)
    with pytest.raises(ParameterDomainError):
        ModelParams(hbar=-1.0)
    with pytest.raises(ParameterDomainError):
        ModelParams(elasticity=float("nan"))


def test_sound_speed():
    assert ModelParams(mass=2.0, elasticity=8.0).sound_speed == pytest.approx(2.0)


# -- coupling -------------------------------------------------------------------


@pytest.mark.parametrize("n,m,J,s,expected", [
    (0, 1, 1.0, 2.5, 1.0),
    (0, 2, 1.0, 2.0, 0.25),
    (3, 0, 2.0, 3.0, 2 / 27),
])
def test_coupling_examples(n, m, J, s, expected):
    assert coupling(n, m, ModelParams(interaction_J=J, exponent_s=s)) == pytest.approx(expected, rel=1e-15)


def test_self_coupling_is_undefined():
    with pytest.raises(ParameterDomainError):
        coupling(4, 4, ModelParams())


# -- lattice sums -----------------------------------------------------------------


def test_dispersion_at_zero_s4():
    p = ModelParams(exponent_s=4.0)
    assert lattice_dispersion(0.0, p) == pytest.approx(math.pi**4 / 45, rel=1e-13)
    assert lattice_dispersion_at_zero(p) == pytest.approx(math.pi**4 / 45, rel=1e-14)


def test_dispersion_at_pi_s4_against_alternating_sum():
    p = ModelParams(exponent_s=4.0)
    value = lattice_dispersion(math.pi, p)
    assert value == pytest.approx(-7 * math.pi**4 / 360, rel=1e-12)
    assert value == pytest.approx(brute_cos_sum(math.pi, 4.0), abs=1e-12)


def test_nearest_neighbour_limit():
    assert lattice_dispersion(math.pi, ModelParams(exponent_s=50.0)) == pytest.approx(-2.0, abs=1e-12)


def test_gap_at_pi_s4():
    expected = math.pi**4 / 45 + 7 * math.pi**4 / 360
    assert spectral_gap(math.pi, ModelParams(exponent_s=4.0)) == pytest.approx(expected, abs=1e-12)


def test_gap_vanishes_at_zero():
    for s in (1.5, 2.0, 2.5, 3.0, 6.0):
        assert spectral_gap(0.0, ModelParams(exponent_s=s)) == 0.0


def test_gap_closed_form_at_s2():
    # sum (1 - cos kn)/n^2 = pi k/2 - k^2/4 on [0, 2 pi]
    p = ModelParams(exponent_s=2.0, interaction_J=1.3)
    for k in (1e-4, 0.01, 0.3, 1.0, 2.5, math.pi):
        assert spectral_gap(k, p) == pytest.approx(1.3 * (math.pi * k - k * k / 2), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(1.1, 8.0), k=st.floats(1e-3, math.pi))
def test_gap_matches_polylog(s, k):
    assert spectral_gap(k, ModelParams(exponent_s=s)) == pytest.approx(polylog_gap(k, s), rel=1e-10, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(1.05, 6.0), k=st.floats(-math.pi, math.pi))
def test_gap_even_and_nonnegative(s, k):
    p = ModelParams(exponent_s=s)
    g = spectral_gap(k, p)
    assert g >= 0.0
    assert spectral_gap(-k, p) == g


def test_gap_nonnegative_dense_sampling():
    k = np.linspace(-math.pi, math.pi, 401)
    for s in (1.2, 2.0, 2.7, 4.0):
        assert np.all(spectral_gap(k, ModelParams(exponent_s=s)) >= 0)


def test_gap_is_linear_in_J():
    k = 0.7
    a = spectral_gap(k, ModelParams(exponent_s=2.5))
    b = spectral_gap(k, ModelParams(exponent_s=2.5, interaction_J=-2.0))
    assert b == pytest.approx(-2 * a, rel=1e-15)


def test_gap_array_input_matches_scalar():
    p = ModelParams(exponent_s=3.3)
    ks = np.array([0.1, 0.2, 3.0])
    np.testing.assert_allclose(spectral_gap(ks, p), [spectral_gap(float(k), p) for k in ks], rtol=0, atol=0)


def test_large_s_approaches_nearest_neighbour():
    k = np.linspace(-math.pi, math.pi, 301)
    for s in (10.0, 14.0, 20.0):
        p = ModelParams(exponent_s=s)
        dev = np.max(np.abs(spectral_gap(k, p) - 2 * (1 - np.cos(k))))
        # n >= 2 terms: 2J sum (1 - cos kn)/n^s <= 4J (zeta(s) - 1)
        assert dev <= 4 * (mpmath.zeta(s) - 1) * (1 + 1e-9)
        # the next-neighbour term alone reaches 4 J 2^-s at k = pi/2
        assert dev > 2 * 2.0**-s


def test_divergent_exponent_rejected():
    for s in (1.0, 0.5):
        with pytest.raises(SumDivergenceError):
            spectral_gap(0.3, ModelParams(exponent_s=s))


def test_tolerance_must_be_positive():
    with pytest.raises(ParameterDomainError):
        spectral_gap(0.3, ModelParams(), tol=0.0)


# -- asymptotic coefficients ------------------------------------------------------


def test_fractional_coefficient_values():
    assert fractional_coefficient(ModelParams(exponent_s=2.0)) == pytest.approx(math.pi, rel=1e-15)
    expected = math.pi / (0.75 * math.sqrt(math.pi) * math.sqrt(2) / 2)
    assert fractional_coefficient(ModelParams(exponent_s=2.5)) == pytest.approx(expected, rel=1e-14)
    # closed form is 3.3421710...; the commonly quoted 3.3422034 agrees to 1e-5 relative
    assert fractional_coefficient(ModelParams(exponent_s=2.5)) == pytest.approx(3.3422034, rel=1e-5)
    assert fractional_coefficient(ModelParams(exponent_s=2.5, interaction_J=2.0)) == pytest.approx(
        2 * expected, rel=1e-15)


def test_fractional_coefficient_domain():
    with pytest.raises(SingularityError):
        fractional_coefficient(ModelParams(exponent_s=3.0))
    for s in (1.9, 3.2):
        with pytest.raises(ParameterDomainError):
            fractional_coefficient(ModelParams(exponent_s=s))


def test_fractional_coefficient_continuity_at_2():
    d = fractional_coefficient(ModelParams(exponent_s=2.001))
    assert abs(d / math.pi - 1) < 0.005


def test_quadratic_coefficient_conventions():
    p = ModelParams(exponent_s=4.0)
    assert quadratic_coefficient(p) == pytest.approx(math.pi**2 / 12, rel=1e-14)
    assert quadratic_coefficient(p, "lattice") == pytest.approx(math.pi**2 / 6, rel=1e-14)
    with pytest.raises(ParameterDomainError):
        quadratic_coefficient(ModelParams(exponent_s=3.0))


def test_small_k_limit_of_gap_over_k2_is_lattice_convention():
    p = ModelParams(exponent_s=4.0)
    k = 1e-4
    # next term is -(pi/6)|k|^3, a 3e-5 relative correction here
    assert spectral_gap(k, p) / k**2 == pytest.approx(quadratic_coefficient(p, "lattice"), rel=1e-4)


@pytest.mark.parametrize("k,s,expected", [
    (0.01, 4.0, (math.pi**2 / 12) * 1e-4),
    (0.1, 2.0, math.pi * 0.1),
    (0.01, 3.0, -1e-4 * math.log(0.01)),
])
def test_asymptotic_gap_examples(k, s, expected):
    assert asymptotic_gap(k, ModelParams(exponent_s=s)) == pytest.approx(expected, rel=1e-12)


def test_asymptotic_gap_is_even_and_log_branch_finite_at_zero():
    p = ModelParams(exponent_s=3.0)
    assert asymptotic_gap(-0.02, p) == asymptotic_gap(0.02, p)
    assert asymptotic_gap(0.0, p) == 0.0


def test_asymptotic_gap_unsupported_below_2():
    with pytest.raises(UnsupportedRegimeError):
        asymptotic_gap(0.1, ModelParams(exponent_s=1.5))


def test_gap_expansion_against_polylog():
    for s in (2.2, 2.5, 2.8, 3.5, 4.5):
        p = ModelParams(exponent_s=s)
        for k in (1e-3, 0.05, 0.5):
            assert gap_expansion(k, p, analytic_terms=6) == pytest.approx(polylog_gap(k, s), rel=1e-11)


def test_leading_asymptote_error_at_k_001_is_the_zeta_correction():
    # The next term J zeta(s-2) k^2 is -4.4% of the leading one at s=2.5, k=0.01.
    p = ModelParams(exponent_s=2.5)
    k = 0.01
    D = fractional_coefficient(p)
    ratio = spectral_gap(k, p) / (D * k**1.5)
    predicted = 1 + float(mpmath.zeta(0.5)) * k**0.5 / D
    assert ratio == pytest.approx(predicted, abs=1e-6)
    assert abs(ratio - 1) > 0.02


# -- regimes ----------------------------------------------------------------------


@pytest.mark.parametrize("s,tag", [
    (2.0, RegimeTag.HILBERT), (2.5, RegimeTag.FRACTIONAL), (3.0, RegimeTag.LOGARITHMIC), (7.0, RegimeTag.QUADRATIC),
])
def test_classify_regime(s, tag):
    assert classify_regime(s).tag is tag


def test_classify_regime_errors():
    with pytest.raises(SumDivergenceError):
        classify_regime(1.0)
    with pytest.raises(UnsupportedRegimeError):
        classify_regime(1.5)


def test_regime_coefficients():
    assert classify_regime(2.0, 2.0).coefficient == pytest.approx(2 * math.pi)
    assert classify_regime(4.0).coefficient == pytest.approx(math.pi**2 / 12)


# -- kernel -----------------------------------------------------------------------


def _kernel_oracle(x, p, k_c, nodes=300):
    # k = u^2 removes the k^(s-3) endpoint singularity; Gauss-Legendre in u
    u, w = np.polynomial.legendre.leggauss(nodes)
    b = math.sqrt(k_c)
    u = 0.5 * b * (u + 1)
    w = 0.5 * b * w
    k = u * u
    g = np.array([polylog_gap(float(kk), p.exponent_s) for kk in k])
    return float(2 / math.pi * np.sum(w * np.cos(k * x) * g / k**2 * 2 * u))


def test_kernel_symmetry_and_oracle():
    p = ModelParams(exponent_s=2.5)
    grid = SpectralGrid(64.0, 64)
    xs = np.array([-3.0, 0.0, 1.5, 3.0])
    K = kernel_K(xs, p, grid)
    assert K[0] == pytest.approx(K[3], rel=1e-12)
    for x, val in zip(xs[1:3], K[1:3]):
        assert val == pytest.approx(_kernel_oracle(x, p, math.pi), rel=1e-6)


def test_kernel_finite_for_quadratic_regime():
    K = kernel_K(0.0, ModelParams(exponent_s=4.0), SpectralGrid(16.0, 16))
    assert math.isfinite(K) and K > 0


def test_kernel_requires_s_above_2():
    with pytest.raises(UnsupportedRegimeError):
        kernel_K(0.0, ModelParams(exponent_s=2.0), SpectralGrid(16.0, 16))


def _log_fit(s):
    k = np.geomspace(1e-3, 1e-2, 200)
    slope, intercept = np.polyfit(np.log(k), np.log(spectral_gap(k, ModelParams(exponent_s=s))), 1)
    return slope, math.exp(intercept)


def test_power_law_fit_at_s_2_2():
    slope, pref = _log_fit(2.2)
    assert abs(slope / 1.2 - 1) < 0.01
    assert abs(pref / fractional_coefficient(ModelParams(exponent_s=2.2)) - 1) < 0.02


@pytest.mark.parametrize("s", [2.2, 2.5, 2.8])
def test_two_term_fit_recovers_fractional_coefficient(s):
    # a single power law cannot absorb the J zeta(s-2) k^2 term near s=3; fitting both terms can
    k = np.geomspace(1e-4, 1e-3, 50)
    basis = np.column_stack([k ** (s - 1), k**2])
    (a, b), *_ = np.linalg.lstsq(basis, spectral_gap(k, ModelParams(exponent_s=s)), rcond=None)
    assert a == pytest.approx(fractional_coefficient(ModelParams(exponent_s=s)), rel=1e-5)
    assert b == pytest.approx(float(mpmath.zeta(s - 2)), rel=1e-2)
