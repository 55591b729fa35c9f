import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from taulab import expsymbol, linsys
from taulab.errors import DomainError, NumericalError


@pytest.fixture
def rank_one():
    return linsys.DiagonalRealization.scalar([1.0], [1.0])


@pytest.mark.parametrize("x", [0.0, 0.4, 1.5])
def test_rank_one_gramian_tau(rank_one, x):
    assert_allclose(linsys.tau_from_gramians(rank_one, x), 1.0 - math.exp(-4.0 * x) / 4.0, rtol=1e-14)


@pytest.mark.parametrize("x", [0.0, 0.7])
def test_rank_one_resolvent_trace(rank_one, x):
    e = math.exp(-2.0 * x)
    assert_allclose(linsys.resolvent_trace(rank_one, x), e / (1.0 - e / 2.0), rtol=1e-13)


def test_rx_matrix_entries():
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0], [3.0, -1.0])
    x = 0.25
    expected = np.array(
        [
            [3.0 * math.exp(-2.0 * x) / 2.0, 3.0 * math.exp(-3.0 * x) / 3.0],
            [-math.exp(-3.0 * x) / 3.0, -math.exp(-4.0 * x) / 4.0],
        ]
    )
    assert_allclose(linsys.rx_matrix(sys, x), expected, rtol=1e-14)


def test_symbol_value_shape_and_value():
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0], [3.0, -1.0])
    values = sys.symbol_value(np.array([0.0, 1.0]))
    assert values.shape == (2, 1, 1)
    assert_allclose(values[:, 0, 0], [2.0, 3.0 * math.exp(-1.0) - math.exp(-2.0)])


@given(
    lambdas=st.lists(st.floats(min_value=0.3, max_value=4.0), min_size=1, max_size=5, unique=True),
    x=st.floats(min_value=0.0, max_value=2.0),
)
def test_gramians_are_hermitian(lambdas, x):
    xis = np.linspace(0.2, 1.0, len(lambdas))
    sys = linsys.DiagonalRealization.scalar(lambdas, xis)
    lx, qx = linsys.gramians(sys, x)
    assert_allclose(lx, lx.conj().T, atol=1e-14)
    assert_allclose(qx, qx.conj().T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(lx) > -1e-12)


def test_resolvent_route_matches_determinant():
    sym = expsymbol.ExpSymbol([1.0, 2.5], [0.7, -0.4])
    sys = expsymbol.to_realization(sym)
    for t in (0.0, 0.5, 1.0):
        assert_allclose(linsys.tau_from_resolvent(sys, t), expsymbol.tau_det(sym, t), rtol=1e-10)


def test_resolvent_trace_is_log_derivative():
    sym = expsymbol.ExpSymbol([0.8, 1.9, 3.0], [0.3, 0.2, -0.25])
    sys = expsymbol.to_realization(sym)
    for x in (0.3, 1.1):
        h = 1e-4
        fd = (math.log(expsymbol.tau_det(sym, x + h).real) - math.log(expsymbol.tau_det(sym, x - h).real)) / (2 * h)
        assert linsys.resolvent_trace(sys, x).real == pytest.approx(fd, abs=1e-7)


def test_gelfand_levitan_residual():
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0], [1.0, 0.5])
    assert linsys.gl_residual(sys, 0.3, 0.7) < 1e-10


def test_gelfand_levitan_blocks_shape():
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0], [1.0, 0.5])
    blocks = linsys.gl_block_solution(sys, 0.2, 0.2)
    assert blocks.G.shape == (2, 2)
    assert np.isfinite(blocks.trace)


def test_integrable_form_of_rx_squared():
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0, 3.5], [1.0, -0.5, 0.25])
    rx = linsys.rx_matrix(sys, 0.2)
    assert_allclose(linsys.rx_squared_matrix(sys, 0.2), rx @ rx, rtol=1e-12, atol=1e-15)
    big_l, residual = linsys.integrable_inverse(sys, 0.8, 0.2)
    assert residual < 1e-12
    assert_allclose(big_l, np.linalg.inv(np.eye(3) - 0.64 * rx @ rx) - np.eye(3), atol=1e-12)


def test_integrable_form_needs_scalar_symbol():
    sys = linsys.DiagonalRealization([1.0, 2.0], np.eye(2), np.eye(2))
    with pytest.raises(DomainError):
        linsys.integrable_f(sys, 0.0)


def test_singular_resolvent():
    # I - R_0 vanishes for xi = 2 lambda
    sys = linsys.DiagonalRealization.scalar([1.0], [2.0])
    with pytest.raises(NumericalError):
        linsys.resolvent_kernel(sys, -1.0, 0.0, 0.0)


def test_empty_system_has_unit_tau():
    sys = linsys.DiagonalRealization.scalar([], [])
    assert linsys.tau_from_resolvent(sys, 0.5) == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lambdas": [-1.0], "b": [[1.0]], "c": [[1.0]]},
        {"lambdas": [1.0, 2.0], "b": [[1.0], [1.0]], "c": [[1.0]]},
        {"lambdas": [1.0], "b": [[1.0]], "c": [[1.0]], "signature": [2.0]},
    ],
)
def test_realization_validation(kwargs):
    with pytest.raises(DomainError):
        linsys.DiagonalRealization(**kwargs)


def test_negative_x_rejected(rank_one):
    with pytest.raises(DomainError):
        linsys.rx_matrix(rank_one, -0.1)


def test_tau_curve_columns():
    curve = linsys.TauCurve.from_function([0.0, 1.0], lambda t: 1.0 + 1j * t, lambda t: 0.5, threads=2)
    assert list(curve.columns()) == ["t", "tau", "sigma", "tau_imag", "sigma_imag"]
    assert curve.is_complex
    real = linsys.TauCurve([0.0, 1.0], [1.0, 2.0])
    assert list(real.columns()) == ["t", "tau"]
    with pytest.raises(DomainError):
        linsys.TauCurve([1.0, 0.0], [1.0, 2.0])
