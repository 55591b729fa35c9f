import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import special

from taulab import lame
from taulab.errors import ConvergenceError, DomainError, NonDecayingSymbolError, PoleError
from taulab.models import EllipticParams

LEMNISCATIC_K = 1.8540746773013719


@pytest.fixture(scope="module")
def params():
    return EllipticParams.from_k2(0.5)


@pytest.fixture(scope="module")
def symbol(params):
    return lame.LameSymbol(params=params, alpha=1.5 * params.K, M=32)


def test_lattice_data(params):
    assert (params.e1, params.e2, params.e3) == pytest.approx((0.5, 0.0, -0.5), abs=1e-15)
    assert params.e1 - params.e3 == pytest.approx(1.0)
    assert params.g2 == pytest.approx(1.0)
    assert params.g3 == pytest.approx(0.0, abs=1e-15)
    assert params.K == pytest.approx(LEMNISCATIC_K, rel=1e-15)
    assert params.Kp == pytest.approx(params.K, rel=1e-15)
    assert params.k == pytest.approx(math.sqrt(0.5))


@pytest.mark.parametrize("k2", [0.0, 1.0, 1.5])
def test_modulus_domain(k2):
    with pytest.raises(DomainError):
        EllipticParams.from_k2(k2)


def test_elliptic_K():
    K, Kp = lame.elliptic_K(0.6)
    assert K == pytest.approx(special.ellipk(0.36))
    assert Kp == pytest.approx(special.ellipk(0.64))
    with pytest.raises(DomainError):
        lame.elliptic_K(1.0)


def test_jacobi_functions():
    xs = np.array([0.1, 0.8, 1.7])
    s, c, d, _ = special.ellipj(xs, 0.3)
    sn, cn, dn = lame.jacobi_elliptic(xs + 0j, 0.3)
    assert_allclose(sn, s, atol=1e-15)
    assert_allclose(cn, c, atol=1e-15)
    assert_allclose(dn, d, atol=1e-15)

    z = 0.4 + 0.7j
    sn, cn, dn = lame.jacobi_elliptic(z, 0.3)
    assert sn**2 + cn**2 == pytest.approx(1.0, abs=1e-13)
    assert dn**2 + 0.3 * sn**2 == pytest.approx(1.0, abs=1e-13)
    assert lame.jacobi_sn(z, math.sqrt(0.3)) == pytest.approx(sn)


def test_jacobi_sn_pole(params):
    with pytest.raises(PoleError):
        lame.jacobi_sn(1j * params.Kp, params.k)


def test_weierstrass_p_half_periods(params):
    wp, dwp = lame.weierstrass_p(params.K, params)
    assert wp == pytest.approx(params.e1, abs=1e-14)
    assert dwp == pytest.approx(0.0, abs=1e-12)
    wp, _ = lame.weierstrass_p(params.K + 1j * params.Kp, params)
    assert wp == pytest.approx(params.e2, abs=1e-14)
    wp, dwp = lame.weierstrass_p(1j * params.Kp, params)
    assert wp == pytest.approx(params.e3, abs=1e-14)
    assert dwp == 0.0


def test_weierstrass_differential_equation(params):
    z = np.array([0.3 + 0.2j, 0.9 + 0.5j, 1.4 - 0.3j])
    wp, dwp = lame.weierstrass_p(z, params)
    assert_allclose(dwp**2, 4.0 * wp**3 - params.g2 * wp - params.g3, rtol=1e-10)


def test_weierstrass_p_laurent_start(params):
    z = 0.01
    wp, _ = lame.weierstrass_p(z, params)
    assert wp.real == pytest.approx(1.0 / z**2 + params.g2 * z**2 / 20.0, rel=1e-11)


def test_weierstrass_p_pole(params):
    with pytest.raises(PoleError):
        lame.weierstrass_p(0.0, params)
    with pytest.raises(PoleError):
        lame.weierstrass_p(2.0 * params.K, params)


@pytest.mark.parametrize("v", [0.3, 0.3 + 0.2j, 1.1 - 0.4j])
@pytest.mark.parametrize("derivative", [0, 1, 3])
def test_theta1_against_mpmath(v, derivative):
    q = 0.1
    expected = complex(mpmath.jtheta(1, v, q, derivative))
    assert lame.jacobi_theta1(v, q, derivative) == pytest.approx(expected, rel=1e-13, abs=1e-15)


def test_theta1_domain():
    with pytest.raises(DomainError):
        lame.jacobi_theta1(0.1, 1.0)
    with pytest.raises(DomainError):
        lame.jacobi_theta1(0.1, 0.5, derivative=4)


def test_zeta_is_minus_antiderivative_of_p(params):
    z, h = 0.6 + 0.3j, 1e-4
    zeta_plus, _ = lame.weierstrass_zeta_sigma(z + h, params)
    zeta_minus, _ = lame.weierstrass_zeta_sigma(z - h, params)
    wp, _ = lame.weierstrass_p(z, params)
    assert (zeta_plus - zeta_minus) / (2.0 * h) == pytest.approx(-wp, rel=1e-7)


def test_sigma_near_origin(params):
    _, sigma = lame.weierstrass_zeta_sigma(1e-3, params)
    assert sigma == pytest.approx(1e-3, rel=1e-10)


def test_legendre_relation(params):
    eta1, eta3 = lame.quasi_periods(params)
    assert eta1 * 1j * params.Kp - eta3 * params.K == pytest.approx(0.5j * math.pi, abs=1e-12)
    # the square lattice has eta1 = pi / (4K)
    assert eta1 == pytest.approx(math.pi / (4.0 * params.K), rel=1e-12)


def test_sigma_product_matches_theta_form(params):
    z = 0.4 + 0.1j
    _, sigma = lame.weierstrass_zeta_sigma(z, params)
    assert lame.sigma_lattice_product(z, params) == pytest.approx(sigma, rel=1e-6)


def test_symbol_construction(params, symbol):
    assert symbol.offset == 1j * params.Kp
    assert symbol.period == pytest.approx(2.0 * params.K)
    assert symbol.beta.real > 0.0
    assert symbol.decay_rate == pytest.approx(symbol.beta.real / (2.0 * params.K))


def test_symbol_rejects_bad_input(params):
    with pytest.raises(NonDecayingSymbolError):
        lame.LameSymbol(params=params, alpha=0.1 * params.K)
    with pytest.raises(PoleError):
        lame.LameSymbol(params=params, alpha=2.0 * params.K)
    with pytest.raises(DomainError):
        lame.LameSymbol(params=params, alpha=1.5 * params.K, M=0)


def test_beta_without_decay_requirement(params):
    beta = lame.beta_exponent(params, 0.1 * params.K, require_decay=False)
    assert beta.real < 0.0


def test_psi_against_reference(symbol):
    for x in (0.4 + 1j * symbol.params.Kp, 1.1 + 0.3j, 2.5 + 1.2j):
        assert lame.lame_psi(x, symbol) == pytest.approx(lame.lame_psi_reference(x, symbol), rel=1e-10)


def test_lame_equation(symbol):
    for x in (0.7 + 1j * symbol.params.Kp, 2.2 + 0.5j):
        scale = max(1.0, abs(lame.lame_psi(x, symbol)))
        assert lame.lame_ode_residual(x, symbol) / scale < 1e-7


def test_quasi_periodicity(symbol):
    x = 0.7 + 1j * symbol.params.Kp
    shifted = lame.lame_psi(x + 2.0 * symbol.params.K, symbol)
    assert shifted == pytest.approx(np.exp(-symbol.beta) * lame.lame_psi(x, symbol), rel=1e-9)


@given(
    st.floats(min_value=0.1, max_value=0.9),
    st.floats(min_value=1.1, max_value=1.9),
    st.floats(min_value=-0.3, max_value=0.3),
    st.floats(min_value=0.05, max_value=0.95),
)
def test_psi_product_and_quasi_periodicity(k2, alpha_re, alpha_im, position):
    params = EllipticParams.from_k2(k2)
    alpha = complex(alpha_re * params.K, alpha_im * params.Kp)
    assume(lame.beta_exponent(params, alpha, require_decay=False).real > 0.0)
    sym = lame.LameSymbol(params=params, alpha=alpha)
    x = complex(2.0 * position * params.K, params.Kp)

    wp_alpha, _ = lame.weierstrass_p(alpha, params)
    wp_x, _ = lame.weierstrass_p(x, params)
    product = lame.lame_psi(x, sym) * lame.lame_psi(-x, sym)
    assert abs(product - (wp_alpha - wp_x)) <= 1e-9 * max(1.0, abs(wp_alpha), abs(wp_x))

    shifted = lame.lame_psi(x + sym.period, sym)
    assert shifted == pytest.approx(np.exp(-sym.beta) * lame.lame_psi(x, sym), rel=1e-9)


def test_bilateral_lambdas():
    lambdas = lame.bilateral_lambdas(2.0 + 0.5j, 1.5, 3)
    assert lambdas.size == 7
    assert lambdas[3] == pytest.approx((2.0 + 0.5j) / 3.0)
    assert_allclose(np.diff(lambdas), 2j * math.pi / 3.0)


def test_expansion_reconstructs_symbol(params):
    sym = lame.LameSymbol(params=params, alpha=1.5 * params.K, M=64)
    expansion = lame.exp_expansion(sym)
    assert expansion.size == 129
    xs = np.linspace(0.1, sym.period - 0.1, 15)
    exact = sym.symbol(xs)
    assert np.max(np.abs(expansion(xs) - exact)) / np.max(np.abs(exact)) < 1e-8


def test_lattice_sum_closed_form(symbol):
    value = lame.lattice_sum(symbol.beta, symbol.params.K)
    closed = lame.lattice_sum_closed(symbol.beta, symbol.params.K)
    assert value == pytest.approx(closed, rel=1e-8)


def test_gram_condition_is_finite(symbol):
    cond = lame.bilateral_gram_condition(symbol.beta, symbol.params.K, 4)
    assert 1.0 < cond < 1e12


def test_gram_condition_bounded_in_truncation(params):
    beta = lame.beta_exponent(params, 1.1 * params.K)
    assert beta.real == pytest.approx(0.5, abs=0.05)
    coarse = lame.bilateral_gram_condition(beta, params.K, 32)
    fine = lame.bilateral_gram_condition(beta, params.K, 64)
    assert fine / coarse < 1.05
    # Toeplitz symbol bound
    assert fine < math.exp(2.0 * beta.real) * 1.001


@pytest.mark.slow
def test_tau_against_hankel_oracle(symbol):
    ts = np.array([0.0, 0.6, 1.2])
    curve = lame.tau_lame(symbol, ts, threads=2)
    oracle = lame.hankel_oracle(symbol, ts, threads=2)
    assert_allclose(curve.taus, oracle, atol=1e-7)
    assert curve.sigmas is not None


def test_auto_truncation_doubles_M(symbol):
    curve, M = lame.auto_truncation(symbol, [0.0, 0.5], tol=1e-6, max_doublings=3)
    assert M in (64, 128, 256)
    assert curve.ts.tolist() == [0.0, 0.5]


def test_auto_truncation_gives_up(symbol):
    with pytest.raises(ConvergenceError):
        lame.auto_truncation(symbol, [0.0], tol=0.0, max_doublings=1)


@pytest.mark.slow
def test_hankel_oracle_panel_doubling(symbol):
    grid = lame.oracle_grid(symbol, nodes=24)
    coarse = lame.hankel_oracle(symbol, [0.0, 1.0], nodes=24, panels=grid.panels, threads=2)
    fine = lame.hankel_oracle(symbol, [0.0, 1.0], nodes=24, panels=2 * grid.panels, threads=2)
    assert np.max(np.abs(fine - coarse)) < 1e-10
