import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from taulab import expsymbol, linsys, numkit
from taulab.errors import DomainError, DuplicateExponentError


def hankel_det(sym, t, panels=None):
    rate = float(np.min(sym.lambdas.real))
    grid = numkit.half_line_grid(t, rate, tol=1e-15, panels=panels, nodes=16)
    return numkit.hankel_matrix(lambda s: sym(s), grid).det(-1.0)


@pytest.mark.parametrize("t", [0.0, 0.5, 3.0])
def test_rank_one_tau(t):
    sym = expsymbol.ExpSymbol([1.0], [1.0])
    assert_allclose(expsymbol.tau_det(sym, t), 1.0 - math.exp(-2.0 * t) / 2.0, rtol=1e-14)


@pytest.mark.parametrize(
    "lambdas, xis",
    [
        ([1.0, 2.5], [0.7, -0.4]),
        ([0.6, 1.3, 2.2], [0.2, 0.15, -0.1]),
        ([1.0 + 1.0j, 1.0 - 1.0j], [0.3 - 0.2j, 0.3 + 0.2j]),
    ],
)
def test_tau_det_matches_hankel_quadrature(lambdas, xis):
    sym = expsymbol.ExpSymbol(lambdas, xis)
    for t in (0.0, 0.5):
        assert_allclose(expsymbol.tau_det(sym, t), hankel_det(sym, t), rtol=1e-10, atol=1e-12)


def test_hankel_determinant_panel_doubling():
    sym = expsymbol.ExpSymbol([1.0, 2.0], [1.0, 1.0])
    panels = numkit.half_line_grid(0.0, 1.0, tol=1e-15, nodes=16).panels
    coarse = hankel_det(sym, 0.0, panels)
    fine = hankel_det(sym, 0.0, 2 * panels)
    assert abs(fine - coarse) < 1e-10
    assert fine == pytest.approx(19.0 / 72.0, abs=1e-12)


def test_empty_symbol():
    sym = expsymbol.ExpSymbol.from_terms([])
    assert sym.size == 0
    assert expsymbol.tau_det(sym, 1.0) == 1.0
    assert expsymbol.tau_squared_series(sym, 1.0) == 1.0


def test_symbol_evaluation_and_shift():
    sym = expsymbol.ExpSymbol([1.0, 2.0], [2.0, -1.0])
    xs = np.array([0.0, 0.5])
    assert_allclose(sym(xs), 2.0 * np.exp(-xs) - np.exp(-2.0 * xs))
    assert_allclose(sym.shifted(0.3)(xs), sym(xs + 0.3))
    assert_allclose(sym.transfer_function(1.0), [2.0 / 2.0 - 1.0 / 3.0])


def test_realization_reproduces_symbol():
    sym = expsymbol.ExpSymbol([0.5, 1.5], [1.0, 0.25])
    values = expsymbol.to_realization(sym).symbol_value(np.array([0.0, 1.0, 2.0]))
    assert_allclose(values[:, 0, 0], sym(np.array([0.0, 1.0, 2.0])))


def test_duplicate_exponents_rejected():
    with pytest.raises(DuplicateExponentError):
        expsymbol.ExpSymbol([1.0, 1.0], [1.0, 2.0])


@pytest.mark.parametrize("lambdas", [[0.0], [-1.0, 2.0], [1j]])
def test_exponents_need_positive_real_part(lambdas):
    with pytest.raises(DomainError):
        expsymbol.ExpSymbol(lambdas, np.ones(len(lambdas)))


def test_negative_shift_rejected():
    with pytest.raises(DomainError):
        expsymbol.tau_det(expsymbol.ExpSymbol([1.0], [1.0]), -1.0)


def test_self_adjoint_example():
    sym = expsymbol.ExpSymbol([1.0, 2.0], [1.0, 1.0])
    expected = 2413.0 / 5184.0
    assert expsymbol.tau_squared_series(sym, 0.0) == pytest.approx(expected, rel=1e-12)
    # det(I - Gamma^2) = det(I - Gamma) det(I + Gamma) for self-adjoint Gamma
    rx = linsys.rx_matrix(expsymbol.to_realization(sym), 0.0)
    minus = expsymbol.tau_det(sym, 0.0).real
    assert minus * np.linalg.det(np.eye(2) + rx) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "lambdas, xis",
    [
        ([1.0, 2.0, 3.0], [0.4, -0.2, 0.1]),
        ([0.7, 1.1 + 0.5j], [[0.3, 0.1], [0.2j, -0.1]]),
    ],
)
def test_minor_expansion_matches_gramians(lambdas, xis):
    sym = expsymbol.ExpSymbol(lambdas, xis)
    gram = linsys.tau_from_gramians(expsymbol.to_realization(sym), 0.25)
    assert_allclose(expsymbol.tau_squared_series(sym, 0.25), gram, rtol=1e-10)


def test_minor_expansion_orders():
    sym = expsymbol.ExpSymbol([1.0, 2.0], [1.0, 1.0])
    terms = expsymbol.tau_squared_terms(sym, 0.0)
    assert len(terms) == 3
    assert terms[0] == 1.0
    assert sum(terms) == pytest.approx(2413.0 / 5184.0, rel=1e-12)
    # capping the order keeps the leading terms
    assert expsymbol.tau_squared_terms(sym, 0.0, max_order=1) == pytest.approx(terms[:2])


def test_higher_poles_limit():
    sym = expsymbol.resolve_higher_poles([expsymbol.PolyExpTerm(1.0, 1, 1.0)], 1e-5)
    xs = np.linspace(0.0, 4.0, 9)
    assert_allclose(sym(xs), xs * np.exp(-xs), atol=1e-4)
    assert sym.size == 2


def test_higher_poles_second_order():
    sym = expsymbol.resolve_higher_poles([expsymbol.PolyExpTerm(2.0, 2, 0.5)], 1e-4)
    xs = np.linspace(0.0, 3.0, 7)
    assert_allclose(sym(xs), 0.5 * xs**2 * np.exp(-2.0 * xs), atol=1e-3)


def test_higher_poles_collision():
    terms = [expsymbol.PolyExpTerm(1.0, 1), expsymbol.PolyExpTerm(1.5, 0)]
    with pytest.raises(DuplicateExponentError):
        expsymbol.resolve_higher_poles(terms, 0.5)


def test_partition_coordinates():
    p = expsymbol.Partition((3, 1))
    assert p.weight == 4
    assert p.conjugate.parts == (2, 1, 1)
    assert p.rank == 1
    assert p.frobenius == ((2,), (1,))
    assert expsymbol.Partition.from_frobenius((2,), (1,)) == p
    assert sorted(p.hooks()) == [1, 1, 2, 4]
    assert expsymbol.dimension(p) == 3


@pytest.mark.parametrize("n, count", [(0, 1), (1, 1), (4, 5), (7, 15)])
def test_partition_counts(n, count):
    assert len(list(expsymbol.partitions(n))) == count


@pytest.mark.parametrize("n", range(9))
def test_hook_length_sum_of_squares(n):
    assert sum(expsymbol.dimension(p) ** 2 for p in expsymbol.partitions(n)) == math.factorial(n)


@given(st.integers(min_value=1, max_value=7), st.data())
def test_frobenius_round_trip_and_ratio(n, data):
    p = data.draw(st.sampled_from(list(expsymbol.partitions(n))))
    assert expsymbol.Partition.from_frobenius(*p.frobenius) == p
    assert expsymbol.frobenius_ratio(p) == pytest.approx(expsymbol.dimension(p) / math.factorial(n), rel=1e-12)


def test_partition_validation():
    with pytest.raises(DomainError):
        expsymbol.Partition((1, 2))
    with pytest.raises(DomainError):
        expsymbol.Partition((2, 0))


def test_gram_bounds():
    bounds = expsymbol.gram_bounds([1.0, 2.0])
    assert bounds.det == pytest.approx(1.0 / 72.0, rel=1e-13)
    assert bounds.min_eig > 0.0
    assert bounds.condition > 1.0
    with pytest.raises(DuplicateExponentError):
        expsymbol.gram_bounds([1.0, 1.0])
