"""
Exponential symbols phi(x) = sum_j xi_j exp(-lambda_j x) and partition combinatorics.

tau is available two ways: as the finite determinant det(I - R_t) of the
diagonal realization, and as the Cauchy-Binet minor expansion of
det(I - Gamma* Gamma) over pairs of index sets (S, T) of equal size.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import reduce
from operator import mul
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, DuplicateExponentError
from .linsys import DiagonalRealization, rx_matrix
from .numkit import lu_logdet, ordered_sum, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "ExpSymbol",
    "PolyExpTerm",
    "Partition",
    "GramBounds",
    "check_distinct",
    "to_realization",
    "tau_det",
    "tau_squared_terms",
    "tau_squared_series",
    "resolve_higher_poles",
    "partitions",
    "dimension",
    "frobenius_ratio",
    "gram_bounds",
]

DUPLICATE_TOL = 1e-14


def check_distinct(lambdas: np.ndarray) -> None:
    if lambdas.size < 2:
        return
    gaps = np.abs(lambdas[:, None] - lambdas[None, :])
    np.fill_diagonal(gaps, np.inf)
    scale = max(1.0, float(np.max(np.abs(lambdas))))
    if np.min(gaps) <= DUPLICATE_TOL * scale:
        j, k = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
        raise DuplicateExponentError(
            f"exponents {lambdas[j]} and {lambdas[k]} coincide",
            context={"j": int(j), "k": int(k)},
        )


@dataclass(frozen=True)
class ExpSymbol:
    """
    Finite exponential symbol.

    Attributes:
        lambdas: Exponents, shape (N,), Re > 0, pairwise distinct
        xis: Coefficient vectors, shape (N, d)
    """

    lambdas: np.ndarray
    xis: np.ndarray

    def __post_init__(self):
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=complex)).ravel()
        xis = np.asarray(self.xis, dtype=complex)
        if xis.ndim <= 1:
            xis = xis.reshape(lambdas.size, 1) if lambdas.size else np.zeros((0, 1), complex)
        if xis.shape[0] != lambdas.size:
            raise DomainError(f"{xis.shape[0]} coefficient vectors for {lambdas.size} exponents")
        if np.any(lambdas.real <= 0.0):
            raise DomainError("exponents must satisfy Re lambda > 0", tag="semigroup")
        check_distinct(lambdas)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "xis", xis)

    @classmethod
    def from_terms(cls, terms: Sequence[Tuple[complex, Sequence[complex]]]) -> "ExpSymbol":
        terms = list(terms)
        if not terms:
            return cls(np.zeros(0, complex), np.zeros((0, 1), complex))
        lambdas = [lam for lam, _ in terms]
        xis = [np.atleast_1d(np.asarray(xi, dtype=complex)) for _, xi in terms]
        return cls(np.asarray(lambdas), np.vstack(xis))

    @property
    def size(self) -> int:
        return self.lambdas.size

    @property
    def channel_dim(self) -> int:
        return self.xis.shape[1]

    def eval(self, x) -> np.ndarray:
        """sum_j xi_j exp(-lambda_j x), shape x.shape + (d,)."""
        x = np.asarray(x, dtype=float)
        weights = np.exp(-np.multiply.outer(x, self.lambdas))
        return np.sum(weights[..., :, None] * self.xis, axis=-2)

    def __call__(self, x) -> np.ndarray:
        if self.channel_dim != 1:
            raise DomainError("scalar evaluation needs a single channel")
        return self.eval(x)[..., 0]

    def transfer_function(self, s: complex) -> np.ndarray:
        """Laplace transform sum_j xi_j / (s + lambda_j)."""
        return np.sum(self.xis / (s + self.lambdas)[:, None], axis=0)

    def shifted(self, t: float) -> "ExpSymbol":
        """Symbol of x -> phi(x + t)."""
        return ExpSymbol(self.lambdas, self.xis * np.exp(-self.lambdas * t)[:, None])


def to_realization(sym: ExpSymbol) -> DiagonalRealization:
    """Diagonal system with B = xi and C = summation row, so phi(x) = C e^{-xA} B."""
    return DiagonalRealization(sym.lambdas, sym.xis, np.ones((1, sym.size)))


def tau_det(sym: ExpSymbol, t: float) -> complex:
    """tau(t) = det(I - R_t) for a scalar symbol."""
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    if sym.size == 0:
        return 1.0 + 0j
    if sym.channel_dim != 1:
        raise DomainError("det(I - R_t) is defined for scalar symbols")
    rx = rx_matrix(to_realization(sym), t)
    _, value = lu_logdet(np.eye(sym.size) - rx)
    return value


def _bounded_subsets(n: int, size: int, max_sum: float, start: int = 0) -> Iterator[Tuple[int, ...]]:
    """Increasing index tuples of the given size from range(start, n) with sum <= max_sum."""
    if size == 0:
        yield ()
        return
    # the smallest completion uses consecutive indices
    for first in range(start, n - size + 1):
        least = first * size + size * (size - 1) // 2
        if least > max_sum:
            return
        for rest in _bounded_subsets(n, size - 1, max_sum - first, first + 1):
            yield (first,) + rest


def _cauchy_binet_factors(sym: ExpSymbol, t: float) -> Tuple[np.ndarray, np.ndarray]:
    lam = sym.lambdas
    n, d = sym.xis.shape
    # column k * d + r of A (row of B) belongs to exponent k and channel r
    lam_t = np.repeat(lam, d)
    chan = np.tile(np.arange(d), n)
    xi_t = sym.xis.reshape(-1)
    a = sym.xis[:, chan] * np.exp(-2.0 * lam * t)[:, None] / (lam[:, None] + lam_t.conj()[None, :])
    b = (xi_t.conj() * np.exp(-2.0 * lam_t.conj() * t))[:, None] / (lam_t.conj()[:, None] + lam[None, :])
    return a, b


def tau_squared_terms(
    sym: ExpSymbol,
    t: float,
    max_order: Optional[int] = None,
    weight_cap: Optional[int] = None,
    threads: Optional[int] = None,
) -> List[complex]:
    """
    Per-order contributions of the minor expansion of det(I - Gamma* Gamma).

    Order l collects (-1)^l det A[S, T] det B[T, S] over |S| = |T| = l, where
    S runs over exponents and T over (exponent, channel) pairs.

    Args:
        sym: Exponential symbol
        t: Shift, the symbol is phi(x + 2t)
        max_order: Cap on l; defaults to the full order min(N, N d)
        weight_cap: Optional cap on sum(S) + sum(k for (k, r) in T) + l
        threads: Thread count for the order blocks

    Returns:
        List of contributions for l = 0, 1, ..., max_order
    """
    n, d = sym.xis.shape
    full = min(n, n * d)
    max_order = full if max_order is None else min(int(max_order), full)
    if n == 0:
        return [1.0 + 0j]
    a, b = _cauchy_binet_factors(sym, t)
    cap = math.inf if weight_cap is None else float(weight_cap)

    def column_sets(order: int, budget: float) -> Iterator[Tuple[int, ...]]:
        if d == 1:
            yield from _bounded_subsets(n, order, budget)
            return
        for cols in itertools.combinations(range(n * d), order):
            if sum(col // d for col in cols) <= budget:
                yield cols

    def order_block(order: int) -> complex:
        if order == 0:
            return 1.0 + 0j
        contributions = []
        for s in _bounded_subsets(n, order, cap - order):
            for cols in column_sets(order, cap - order - sum(s)):
                minor_a = np.linalg.det(a[np.ix_(s, cols)])
                minor_b = np.linalg.det(b[np.ix_(cols, s)])
                contributions.append(minor_a * minor_b)
        return (-1) ** order * ordered_sum(np.asarray(contributions, dtype=complex))

    blocks = parallel_map(order_block, range(max_order + 1), threads)
    if weight_cap is not None:
        logger.info("minor expansion: order<=%d weight_cap=%s", max_order, weight_cap)
    return [complex(block) for block in blocks]


def tau_squared_series(
    sym: ExpSymbol,
    t: float,
    max_order: Optional[int] = None,
    weight_cap: Optional[int] = None,
) -> complex:
    """det(I - Gamma*_{phi(t)} Gamma_{phi(t)}) by the (S, T) minor expansion."""
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    return complex(ordered_sum(np.asarray(tau_squared_terms(sym, t, max_order, weight_cap))))


class PolyExpTerm(NamedTuple):
    """coeff * t^k * exp(-lam t)."""

    lam: complex
    k: int
    coeff: complex = 1.0


def resolve_higher_poles(terms: Sequence[PolyExpTerm], eps: float) -> ExpSymbol:
    """
    Replace each t^k e^{-lam t} by the k-th backward difference (-Delta_eps)^k e^{-lam t}.

    (-Delta_eps)^k e^{-lam t} = eps^{-k} sum_i binom(k, i) (-1)^i e^{-(lam + i eps) t}
    tends to t^k e^{-lam t} as eps -> 0. Terms sharing a base exponent are merged;
    an offset exponent landing on another group's exponent is an error.

    Args:
        terms: Polynomial-exponential terms with Re lam > 0
        eps: Difference step, eps > 0

    Returns:
        Scalar ExpSymbol with one exponential per distinct offset exponent
    """
    if not eps > 0.0:
        raise DomainError(f"difference step must be positive, got {eps}")
    groups: dict = {}
    for term in terms:
        if term.k < 0:
            raise DomainError(f"polynomial degree must be >= 0, got {term.k}")
        base = complex(term.lam)
        bucket = groups.setdefault(base, {})
        for i in range(term.k + 1):
            weight = term.coeff * math.comb(term.k, i) * (-1) ** i / eps**term.k
            bucket[i] = bucket.get(i, 0.0) + weight
    lambdas: List[complex] = []
    xis: List[complex] = []
    owners: List[complex] = []
    for base, bucket in groups.items():
        for i, weight in sorted(bucket.items()):
            lam = base + i * eps
            for other, owner in zip(lambdas, owners):
                if owner != base and abs(other - lam) <= DUPLICATE_TOL * max(1.0, abs(lam)):
                    raise DuplicateExponentError(
                        f"offset exponent {lam} collides with exponent {other}",
                        context={"eps": eps},
                    )
            lambdas.append(lam)
            xis.append(weight)
            owners.append(base)
    return ExpSymbol(np.asarray(lambdas, dtype=complex), np.asarray(xis, dtype=complex).reshape(-1, 1))


@dataclass(frozen=True)
class Partition:
    """Integer partition n_1 >= n_2 >= ... > 0."""

    parts: Tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p <= 0 for p in parts):
            raise DomainError(f"partition parts must be positive, got {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise DomainError(f"partition parts must be weakly decreasing, got {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    @property
    def conjugate(self) -> "Partition":
        if not self.parts:
            return self
        return Partition(tuple(sum(1 for p in self.parts if p > i) for i in range(self.parts[0])))

    @property
    def rank(self) -> int:
        """Durfee length: number of i with n_i >= i (1-based)."""
        return sum(1 for i, p in enumerate(self.parts) if p > i)

    @property
    def frobenius(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """Arm and leg coordinates a_i = n_i - i, b_i = n'_i - i (1-based i)."""
        conj = self.conjugate.parts
        r = self.rank
        arms = tuple(self.parts[i] - i - 1 for i in range(r))
        legs = tuple(conj[i] - i - 1 for i in range(r))
        return arms, legs

    @classmethod
    def from_frobenius(cls, arms: Sequence[int], legs: Sequence[int]) -> "Partition":
        arms, legs = tuple(arms), tuple(legs)
        if len(arms) != len(legs):
            raise DomainError("Frobenius coordinates need equally many arms and legs")
        if any(arms[i] <= arms[i + 1] for i in range(len(arms) - 1)) or any(
            legs[i] <= legs[i + 1] for i in range(len(legs) - 1)
        ):
            raise DomainError("Frobenius coordinates must be strictly decreasing")
        r = len(arms)
        if r == 0:
            return cls(())
        rows = [arms[i] + i + 1 for i in range(r)]
        # rows below the Durfee square come from the legs
        below = [sum(1 for j in range(r) if legs[j] + j >= i) for i in range(r, r + legs[0] + 1)]
        return cls(tuple(rows + [p for p in below if p > 0]))

    def hooks(self) -> Iterator[int]:
        conj = self.conjugate.parts
        for i, row in enumerate(self.parts):
            for j in range(row):
                yield (row - j - 1) + (conj[j] - i - 1) + 1


def partitions(n: int) -> Iterator[Partition]:
    """All partitions of n in decreasing lexicographic order."""
    if n < 0:
        raise DomainError(f"cannot partition {n}")

    def build(remaining: int, largest: int) -> Iterator[Tuple[int, ...]]:
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, largest), 0, -1):
            for rest in build(remaining - first, first):
                yield (first,) + rest

    for parts in build(n, n):
        yield Partition(parts)


def dimension(p: Partition) -> int:
    """Number of standard Young tableaux by the hook length formula, exact."""
    hooks = reduce(mul, p.hooks(), 1)
    return math.factorial(p.weight) // hooks


def frobenius_ratio(p: Partition) -> float:
    """
    det[1 / ((a_i + b_j + 1) a_i! b_j!)] over Frobenius coordinates.

    Equals dimension(p) / |p|!.
    """
    arms, legs = p.frobenius
    if not arms:
        return 1.0
    a = np.asarray(arms, dtype=float)
    b = np.asarray(legs, dtype=float)
    fa = np.array([math.factorial(v) for v in arms], dtype=float)
    fb = np.array([math.factorial(v) for v in legs], dtype=float)
    matrix = 1.0 / ((a[:, None] + b[None, :] + 1.0) * fa[:, None] * fb[None, :])
    return float(np.linalg.det(matrix))


class GramBounds(NamedTuple):
    """Gram determinant and spectral bounds of [1 / (lambda_j + conj(lambda_k))]."""

    det: float
    logdet: float
    min_eig: float
    max_eig: float

    @property
    def condition(self) -> float:
        return self.max_eig / self.min_eig


def gram_bounds(lambdas: Sequence[complex]) -> GramBounds:
    """Gram matrix of the exponentials e^{-lambda_j x} in L^2(0, oo)."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    if np.any(lam.real <= 0.0):
        raise DomainError("exponents must satisfy Re lambda > 0", tag="semigroup")
    check_distinct(lam)
    gram = 1.0 / (lam[:, None] + lam.conj()[None, :])
    eigs = np.linalg.eigvalsh(gram)
    logdet, value = lu_logdet(gram)
    return GramBounds(det=float(value.real), logdet=float(logdet.real), min_eig=float(eigs[0]), max_eig=float(eigs[-1]))
