import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from taulab import hypergeom
from taulab.errors import DomainError
from taulab.models import HgParams

ROOT_TWO = math.sqrt(2.0)


@pytest.fixture(scope="module")
def params():
    return HgParams(a=ROOT_TWO, b=-ROOT_TWO, c=0.5)


@pytest.fixture(scope="module")
def sol(params):
    return hypergeom.integrate_system(params, lam_end=1.05)


def test_parameter_accessors(params):
    assert params.c0 == 0.5
    assert params.c1 == pytest.approx(0.5)
    assert params.ab == pytest.approx(-2.0)
    assert params.kappa == pytest.approx(ROOT_TWO)


@pytest.mark.parametrize(
    "a, b, c",
    [
        (2.0, -1.9, 0.5),  # a + b != 0
        (1.0, -1.0, 0.5),  # -ab <= 5/4
        (1.5, -1.5, 0.5),  # 2 sqrt(-ab) = 3
        (ROOT_TWO, -ROOT_TWO, 1.2),
    ],
)
def test_parameter_validation(a, b, c):
    with pytest.raises(ValueError):
        HgParams(a=a, b=b, c=c)


def test_w_matrix(params):
    w = hypergeom.w_matrix(params, 2.0)
    assert_allclose(w, [[0.0, 2.0**-0.5], [2.0 * 2.0**-0.5, 0.0]], rtol=1e-14)
    assert np.trace(w) == 0.0


def test_lambda_must_exceed_one(params):
    with pytest.raises(DomainError):
        hypergeom.w_matrix(params, 1.0)
    with pytest.raises(DomainError):
        hypergeom.q_potential(params, [2.0, 0.5])
    with pytest.raises(DomainError):
        hypergeom.lg_seed(params, 1.5)


def test_potential_value(params):
    assert hypergeom.q_potential(params, 2.0) == pytest.approx(0.828125, rel=1e-14)


def test_potential_tail(params):
    lam = 1e6
    assert hypergeom.q_potential(params, lam) * lam**2 == pytest.approx(2.0 - 0.25, rel=1e-5)


def test_potential_difference_under_c_reflection():
    lam = np.array([1.3, 2.0, 7.5])
    low = HgParams(a=ROOT_TWO, b=-ROOT_TWO, c=0.3)
    high = HgParams(a=ROOT_TWO, b=-ROOT_TWO, c=0.7)
    expected = 0.25 * (1.0 - 2.0 * 0.3) * (lam**-2 - (lam - 1.0) ** -2)
    assert_allclose(hypergeom.q_potential(low, lam) - hypergeom.q_potential(high, lam), expected, rtol=1e-12)


@pytest.mark.parametrize("c0", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("lam", [1.2, 2.0, 10.0])
def test_stieltjes_representation(c0, lam):
    exact = hypergeom.loewner_function(c0, lam)
    assert hypergeom.loewner_rep(c0, lam) == pytest.approx(exact, rel=1e-10)


def test_stieltjes_endpoints():
    assert hypergeom.loewner_rep(0.5, 2.0) == pytest.approx(2.0**-0.5, rel=1e-13)
    assert hypergeom.loewner_rep(1.0, 2.0) == 0.5
    assert hypergeom.loewner_rep(0.0, 2.0) == 1.0
    with pytest.raises(DomainError):
        hypergeom.loewner_measure(1.5)


def test_loewner_diagonal(params):
    diagonal = hypergeom.loewner_diagonal(params, 2.0, 3.0)
    assert diagonal.gap < 1e-10
    with pytest.raises(DomainError):
        hypergeom.loewner_diagonal(params, 2.0, 2.0)


def test_liouville_green_seed_decays(params):
    near = hypergeom.lg_seed(params, 1e3)
    far = hypergeom.lg_seed(params, 1e4)
    ratio = abs(far[0] / near[0])
    assert ratio == pytest.approx(10.0**-ROOT_TWO, rel=1e-2)


def test_integration_window(params):
    with pytest.raises(DomainError):
        hypergeom.integrate_system(params, lam_end=3.0, lam_start=2.0)


def test_system_residual(sol):
    for lam in (1.5, 2.0, 5.0, 100.0):
        assert sol.residual(lam) < 1e-8


def test_seed_consistency(sol):
    assert sol.seed_consistency() < 1e-6


def test_psi_outside_window(sol):
    assert sol.psi([2.0, 3.0]).shape == (2, 2)
    with pytest.raises(DomainError):
        sol.psi(1.01)


def test_reversibility_on_a_window(sol):
    assert sol.reversibility_error(2.0, 20.0) < 1e-7


def test_bounded_solution_is_square_integrable(sol):
    values = sol.decay_integrals(lower=4.0, windows=5)
    increments = np.diff([0.0] + values)
    assert np.all(increments > 0.0)
    assert increments[-1] < increments[0]


def test_kernel_symmetry_and_diagonal(params, sol):
    assert hypergeom.kernel_k5(params, sol, 2.0, 3.0) == pytest.approx(hypergeom.kernel_k5(params, sol, 3.0, 2.0))
    diagonal = hypergeom.kernel_k5(params, sol, 2.0, 2.0)
    assert diagonal == pytest.approx(hypergeom.kernel_k5(params, sol, 2.0, 2.0 + 1e-5), rel=1e-4)
    grid = np.array([1.5, 2.5])
    matrix = hypergeom.kernel_k5(params, sol, grid[:, None], grid[None, :])
    assert matrix.shape == (2, 2)


def test_derivative_identity(params, sol):
    assert hypergeom.derivative_identity_residual(params, sol, 2.0, 3.0) < 1e-6


def test_signature_split(params, sol):
    grid = np.array([1.5, 2.0, 3.0, 5.0])
    k0, k1 = hypergeom.signature_split(params, sol, grid)
    direct = hypergeom.kernel_k5(params, sol, grid[:, None], grid[None, :])
    assert np.max(np.abs(k0 - k1 - direct)) / np.max(np.abs(direct)) < 1e-6
    for part in (k0, k1):
        assert_allclose(part, part.T)
        assert np.linalg.eigvalsh(part)[0] > -1e-12 * np.max(np.abs(part))


def test_fredholm_window(params, sol):
    with pytest.raises(DomainError):
        hypergeom.fredholm_matrix(params, sol, 0.0)
    with pytest.raises(DomainError):
        hypergeom.fredholm_matrix(params, sol, 0.01)


@pytest.mark.slow
def test_fredholm_plateau(params, sol):
    value, panels, history = hypergeom.fredholm_plateau(params, sol, 0.1, tol=1e-8)
    assert math.isfinite(value)
    assert abs(history[-1] - history[-2]) <= 1e-8
    matrix = hypergeom.fredholm_matrix(params, sol, 0.1, panels)
    spectrum = hypergeom.kernel_spectrum(matrix)
    assert spectrum.size == matrix.entries.shape[0]
    assert np.all(np.diff(spectrum) >= 0.0)
