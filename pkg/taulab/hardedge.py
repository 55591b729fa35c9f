"""
Bessel hard-edge symbol phi(x) = exp(-x/2) J_nu(2 exp(-x/2)).

tau(x) = det(I - Gamma_{phi(x)}^2) is evaluated three ways: the partition
series over Frobenius coordinates, the Hill-type determinant of the
compressed operator, and the Nystrom determinant of the Hankel square.
"""

import logging
import math
from typing import List, Literal, NamedTuple, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .expsymbol import ExpSymbol, Partition, dimension, partitions
from .models import BesselParams
from .numkit import QuadGrid, half_line_grid, hankel_matrix, lu_logdet, ordered_sum, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "ThreeWayRow",
    "bessel_j",
    "bessel_symbol",
    "transfer_poles",
    "tau_partition_series",
    "hill_matrix",
    "tau_hill",
    "oracle_grid",
    "tau_oracle",
    "three_way",
]

SignMode = Literal["derived", "parts"]
HillForm = Literal["operator", "printed"]


def bessel_j(nu: float, z: float) -> float:
    """J_nu(z) for z >= 0."""
    if z < 0.0:
        raise DomainError(f"bessel_j is used for z >= 0, got {z}")
    return float(special.jv(nu, z))


def _coefficients(nu: float, n: int) -> np.ndarray:
    idx = np.arange(n, dtype=float)
    signs = np.where(idx % 2 == 0, 1.0, -1.0)
    return signs * np.exp(-special.gammaln(idx + 1.0) - special.gammaln(nu + idx + 1.0))


def _exponents(nu: float, n: int) -> np.ndarray:
    return (2.0 * np.arange(n, dtype=float) + nu + 1.0) / 2.0


def bessel_symbol(p: BesselParams) -> ExpSymbol:
    """
    Truncated exponential series of the hard-edge symbol.

    lambda_n = (2n + nu + 1) / 2 and xi_n = (-1)^n / (n! Gamma(nu + n + 1)),
    n = 0, ..., N - 1.
    """
    return ExpSymbol(_exponents(p.nu, p.N), _coefficients(p.nu, p.N).reshape(-1, 1))


def transfer_poles(p: BesselParams) -> np.ndarray:
    """Poles s = -(n + (nu + 1)/2) of the truncated transfer function."""
    return -_exponents(p.nu, p.N)


def _symbol_values(nu: float, s: np.ndarray) -> np.ndarray:
    half = np.exp(-0.5 * s)
    return half * special.jv(nu, 2.0 * half)


def _partition_term(part: Partition, nu: float, x: float, sign_mode: SignMode) -> float:
    if part.weight == 0:
        return 1.0
    arms, legs = part.frobenius
    rank = len(arms)
    if nu == 0.0:
        magnitude = (dimension(part) / math.factorial(part.weight)) ** 2
    else:
        a = np.asarray(arms, dtype=float)
        b = np.asarray(legs, dtype=float)
        cauchy = np.linalg.det(1.0 / (a[:, None] + b[None, :] + nu + 1.0))
        log_w = -(special.gammaln(a + 1.0) + special.gammaln(nu + a + 1.0)).sum()
        log_w -= (special.gammaln(b + 1.0) + special.gammaln(nu + b + 1.0)).sum()
        magnitude = cauchy**2 * math.exp(log_w)
    exponent = part.weight + nu * rank
    sign = (-1) ** part.weight if sign_mode == "derived" else (-1) ** part.length
    return sign * magnitude * math.exp(-2.0 * x * exponent)


def tau_partition_series(
    p: BesselParams,
    x: float,
    sign_mode: SignMode = "derived",
    threads: Optional[int] = None,
) -> float:
    """
    Sum over partitions with |lambda| <= weight_cap.

    Args:
        p: Bessel parameters; weight_cap bounds the partition weight
        x: Shift, x > 0
        sign_mode: "derived" uses (-1)^{|lambda|} (matches the Fredholm
            oracle), "parts" uses (-1)^{number of parts}
        threads: Thread count for the per-weight blocks

    Returns:
        Truncated series value
    """
    if not x > 0.0:
        raise DomainError(f"partition series needs x > 0, got {x}")
    if sign_mode not in ("derived", "parts"):
        raise DomainError(f"unknown sign mode {sign_mode!r}")

    def weight_block(n: int) -> float:
        return ordered_sum([_partition_term(part, p.nu, x, sign_mode) for part in partitions(n)])

    blocks = parallel_map(weight_block, range(p.weight_cap + 1), threads)
    return float(ordered_sum(blocks))


def _digamma_sum(j: np.ndarray, m: np.ndarray, c: float) -> np.ndarray:
    """sum_{k >= 0} 1 / ((j + k + c)(m + k + c)) in closed form."""
    jj, mm = np.meshgrid(j, m, indexing="ij")
    diff = jj - mm
    same = diff == 0
    out = np.empty(jj.shape)
    out[~same] = (special.psi(jj[~same] + c) - special.psi(mm[~same] + c)) / diff[~same]
    out[same] = special.polygamma(1, jj[same] + c)
    return out


def hill_matrix(p: BesselParams, x: float, n: Optional[int] = None, form: HillForm = "operator") -> np.ndarray:
    """
    Hill-type matrix whose det(I - .) approximates tau(x).

    Args:
        p: Bessel parameters
        x: Shift, x >= 0
        n: Matrix size, defaults to p.N
        form: "operator" is (D G)^2 with D = diag(xi_j e^{-2 lambda_j x}) and
            G_jk = 1 / (lambda_j + lambda_k); "printed" is the entrywise
            product formula with the inner k-sum in digamma closed form

    Returns:
        Complex (n, n) matrix
    """
    n = p.N if n is None else int(n)
    if n < 1:
        raise DomainError(f"Hill matrix needs n >= 1, got {n}")
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x}")
    nu = p.nu
    if form == "operator":
        lam = _exponents(nu, n)
        d = _coefficients(nu, n) * np.exp(-2.0 * lam * x)
        dg = d[:, None] / (lam[:, None] + lam[None, :])
        return (dg @ dg).astype(complex)
    if form != "printed":
        raise DomainError(f"unknown Hill form {form!r}")
    idx = np.arange(n, dtype=float)
    c = nu + 1.0
    coeff = _coefficients(nu, n)
    scale = coeff[:, None] * coeff[None, :] * np.exp(-2.0 * x * (idx[:, None] + idx[None, :] + c))
    return (scale * _digamma_sum(idx, idx, c)).astype(complex)


def tau_hill(p: BesselParams, x: float, n: Optional[int] = None, form: HillForm = "operator") -> float:
    matrix = hill_matrix(p, x, n, form)
    _, value = lu_logdet(np.eye(matrix.shape[0]) - matrix.real)
    return float(value.real)


def oracle_grid(p: BesselParams, *, nodes: int = 24, tol: Optional[float] = None, panels: Optional[int] = None) -> QuadGrid:
    """Half-line grid of the oracle; the kernel decays like exp(-(nu + 1)(u + v)/2)."""
    return half_line_grid(0.0, (p.nu + 1.0) / 2.0, tol=tol, panels=panels, nodes=nodes)


def tau_oracle(
    p: BesselParams,
    x: float,
    *,
    nodes: int = 24,
    tol: Optional[float] = None,
    panels: Optional[int] = None,
) -> float:
    """det(I - M^2) with M the Nystrom matrix of the Hankel operator phi(u + v + 2x) on oracle_grid."""
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x}")
    grid = oracle_grid(p, nodes=nodes, tol=tol, panels=panels)
    hankel = hankel_matrix(lambda s: _symbol_values(p.nu, s + 2.0 * x), grid)
    return float(hankel.compose(hankel).det(-1.0).real)


class ThreeWayRow(NamedTuple):
    """One row of the three-way comparison."""

    x: float
    series: float
    hill: float
    oracle: float
    printed: float
    parts_sign_series: float

    @property
    def max_gap(self) -> float:
        return max(abs(self.series - self.hill), abs(self.series - self.oracle), abs(self.hill - self.oracle))

    @property
    def printed_deviation(self) -> float:
        return abs(self.printed - self.oracle)

    @property
    def parts_sign_deviation(self) -> float:
        return abs(self.parts_sign_series - self.oracle)


def three_way(p: BesselParams, xs: Sequence[float], threads: Optional[int] = None) -> List[ThreeWayRow]:
    """Series, Hill and oracle values of tau on a grid, plus the printed-form and parts-sign variants."""

    def row(x: float) -> ThreeWayRow:
        return ThreeWayRow(
            x=float(x),
            series=tau_partition_series(p, x, "derived", threads=1),
            hill=tau_hill(p, x),
            oracle=tau_oracle(p, x),
            printed=tau_hill(p, x, form="printed"),
            parts_sign_series=tau_partition_series(p, x, "parts", threads=1),
        )

    rows = parallel_map(row, xs, threads)
    worst = max((r.max_gap for r in rows), default=0.0)
    logger.info("hard-edge three-way: %d points, max gap %.3e", len(rows), worst)
    return rows
