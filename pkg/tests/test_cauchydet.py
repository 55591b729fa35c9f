import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from taulab import cauchydet
from taulab.errors import DomainError, DuplicateExponentError


def direct_det(lambdas):
    lam = np.asarray(lambdas, dtype=complex)
    return np.linalg.det(1.0 / (lam[:, None] + lam.conj()[None, :])).real


def test_single_exponent():
    spec = cauchydet.ProgressionSpec(1.0, 1.0, 1)
    assert cauchydet.cauchy_det(cauchydet.progression(spec)) == pytest.approx(1.0)
    spec = cauchydet.ProgressionSpec(0.5 + 2.0j, 3.0, 1)
    assert cauchydet.cauchy_det(cauchydet.progression(spec)) == pytest.approx(3.0 / 0.5)


@given(
    st.lists(
        st.tuples(st.floats(min_value=0.2, max_value=3.0), st.floats(min_value=-3.0, max_value=3.0)),
        min_size=1,
        max_size=4,
        unique_by=lambda pair: round(pair[1]),
    )
)
def test_product_formula_matches_direct_determinant(pairs):
    lambdas = [complex(re, round(im)) for re, im in pairs]
    expected = direct_det(lambdas)
    assert cauchydet.cauchy_det(lambdas) == pytest.approx(expected, rel=1e-8)
    assert math.exp(cauchydet.cauchy_logdet(lambdas)) == pytest.approx(expected, rel=1e-8)


def test_lu_route_agrees_with_product_formula():
    lambdas = cauchydet.progression(cauchydet.ProgressionSpec(1.0 + 0.3j, 1.0, 12))
    assert cauchydet.cauchy_det_lu(lambdas) == pytest.approx(math.exp(cauchydet.cauchy_logdet(lambdas)), rel=1e-9)


def test_progression():
    spec = cauchydet.ProgressionSpec(2.0 + 1.0j, 0.5, 3)
    lambdas = cauchydet.progression(spec)
    assert_allclose(lambdas, [(2.0 + 1.0j), (2.0 + 1.0j + 2j * math.pi), (2.0 + 1.0j + 4j * math.pi)])


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_cauchy_equals_toeplitz(n):
    spec = cauchydet.ProgressionSpec(1.0 + 0.3j, 1.0, n)
    direct = cauchydet.cauchy_det(cauchydet.progression(spec))
    form = cauchydet.toeplitz_form(spec)
    assert form.det == pytest.approx(direct, rel=1e-10)
    assert form.matrix.shape == (n, n)
    assert form.coefficients.size == 2 * n - 1


def test_toeplitz_coefficients_are_fourier_coefficients():
    spec = cauchydet.ProgressionSpec(0.8, 1.3, 3)
    u = np.linspace(0.0, 1.0, 20001)
    form = cauchydet.toeplitz_form(spec)
    for m in (-2, 0, 1):
        values = cauchydet.toeplitz_symbol(spec, u) * np.exp(-2j * math.pi * m * u)
        integral = np.trapz(values, u)
        assert integral == pytest.approx(form.coefficients[m + 2], rel=1e-6)


def test_growth_towards_szego_limit():
    report = cauchydet.growth_check(1.0, 1.0)
    assert report.limit == pytest.approx(1.0 / math.sinh(1.0))
    assert report.limit == pytest.approx(0.8509181282393216)
    assert [row.N for row in report.rows] == [4, 8, 16, 32, 64]
    assert report.rows[-1].gap < report.rows[0].gap
    assert report.rows[-1].root == pytest.approx(report.limit, rel=0.05)
    assert report.fitted_C >= max(row.gap for row in report.rows)
    assert report.fit_count == 2
    assert report.within_envelope
    assert len(report.envelope_ratios) == 3


def test_growth_envelope_is_tested_on_held_out_sizes():
    # gaps shrink like N^{-1/3} up to N = 8, then stall
    gaps = [0.4, 0.4 / 2 ** (1.0 / 3.0), 0.3, 0.29]
    rows = [cauchydet.GrowthRow(N=n, root=1.0, gap=g) for n, g in zip([4, 8, 16, 32], gaps)]
    report = cauchydet.GrowthReport.from_rows(rows, limit=1.0)
    assert report.fitted_C == pytest.approx(0.4 * 4 ** (1.0 / 3.0))
    assert report.gaps_decreasing
    assert not report.within_envelope
    assert report.envelope_ratios[0] > 1.0

    assert cauchydet.GrowthReport.from_rows(rows, limit=1.0, C=2.0).within_envelope
    with pytest.raises(DomainError):
        cauchydet.GrowthReport.from_rows(rows[:1], limit=1.0)


def test_growth_check_needs_increasing_sizes():
    with pytest.raises(DomainError):
        cauchydet.growth_check(1.0, 1.0, [8])
    with pytest.raises(DomainError):
        cauchydet.growth_check(1.0, 1.0, [8, 4])


def test_haar_average_matches_determinant():
    spec = cauchydet.ProgressionSpec(1.0, 1.0, 2)
    exact = cauchydet.cauchy_det(cauchydet.progression(spec))
    result = cauchydet.haar_mc(spec, 20_000, seed=7, threads=1)
    assert result.samples == 20_000
    assert abs(result.estimate - exact) <= 4.0 * result.stderr


def test_haar_estimate_ignores_thread_count():
    spec = cauchydet.ProgressionSpec(0.7, 1.0, 3)
    one = cauchydet.haar_mc(spec, 10_000, seed=11, threads=1)
    many = cauchydet.haar_mc(spec, 10_000, seed=11, threads=3)
    assert one == many


def test_haar_limits():
    with pytest.raises(DomainError):
        cauchydet.haar_mc(cauchydet.ProgressionSpec(1.0, 1.0, 7), 10_000, seed=0)
    with pytest.raises(DomainError):
        cauchydet.haar_mc(cauchydet.ProgressionSpec(1.0, 1.0, 2), 100, seed=0)


@pytest.mark.parametrize("beta, K, N", [(0.0, 1.0, 2), (-1.0 + 1j, 1.0, 2), (1.0, 0.0, 2), (1.0, 1.0, 0)])
def test_progression_validation(beta, K, N):
    with pytest.raises(DomainError):
        cauchydet.ProgressionSpec(beta, K, N)


def test_duplicate_exponents():
    with pytest.raises(DuplicateExponentError):
        cauchydet.cauchy_det([1.0, 1.0])
