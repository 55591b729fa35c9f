"""
Cauchy determinants D_N = det[1 / (lambda_j + conj(lambda_k))].

For the progression lambda_j = (2 pi i j + beta) / (2K) the Cauchy matrix is
the Toeplitz matrix of f(u) = 2K exp(-2 Re(beta) u) / (1 - exp(-2 Re beta))
on [0, 1], so D_N is also a Haar average over U(N) and grows like
(K / sinh Re beta)^N.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .expsymbol import check_distinct, gram_bounds
from .numkit import lu_logdet, ordered_sum, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "ProgressionSpec",
    "ToeplitzForm",
    "HaarEstimate",
    "GrowthRow",
    "GrowthReport",
    "cauchy_det",
    "cauchy_logdet",
    "cauchy_det_lu",
    "progression",
    "toeplitz_symbol",
    "toeplitz_form",
    "haar_mc",
    "growth_check",
]

PRODUCT_FORMULA_MAX_N = 64
HAAR_BATCH = 2048


@dataclass(frozen=True)
class ProgressionSpec:
    """Arithmetic progression of exponents with step pi i / K."""

    beta: complex
    K: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "beta", complex(self.beta))
        if not self.beta.real > 0.0:
            raise DomainError(f"Re beta must be positive, got {self.beta}", tag="semigroup")
        if not self.K > 0.0:
            raise DomainError(f"K must be positive, got {self.K}")
        if int(self.N) < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")

    @property
    def a(self) -> float:
        return self.beta.real


def _validated(lambdas: Sequence[complex]) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    if np.any(lam.real <= 0.0):
        raise DomainError("exponents must satisfy Re lambda > 0", tag="semigroup")
    check_distinct(lam)
    return lam


def cauchy_logdet(lambdas: Sequence[complex]) -> float:
    """
    log D_N from the Cauchy product formula.

    D_N = prod_{j<k} |lambda_j - lambda_k|^2 / prod_{j,k} (lambda_j + conj(lambda_k)),
    and the denominator is prod_j 2 Re lambda_j prod_{j<k} |lambda_j + conj(lambda_k)|^2.
    """
    lam = _validated(lambdas)
    upper = np.triu_indices(lam.size, k=1)
    diff = np.abs(lam[:, None] - lam[None, :])[upper]
    plus = np.abs(lam[:, None] + lam.conj()[None, :])[upper]
    terms = np.concatenate([2.0 * np.log(diff), -2.0 * np.log(plus), -np.log(2.0 * lam.real)])
    return float(ordered_sum(terms))


def cauchy_det_lu(lambdas: Sequence[complex]) -> float:
    lam = _validated(lambdas)
    return gram_bounds(lam).det


def cauchy_det(lambdas: Sequence[complex]) -> float:
    """det[1 / (lambda_j + conj(lambda_k))]; product formula up to N = 64, LU above."""
    lam = _validated(lambdas)
    if lam.size <= PRODUCT_FORMULA_MAX_N:
        return math.exp(cauchy_logdet(lam))
    return cauchy_det_lu(lam)


def progression(spec: ProgressionSpec) -> np.ndarray:
    """lambda_j = (2 pi i j + beta) / (2K), j = 0, ..., N - 1."""
    j = np.arange(int(spec.N))
    return (2j * math.pi * j + spec.beta) / (2.0 * spec.K)


def toeplitz_symbol(spec: ProgressionSpec, u) -> np.ndarray:
    """f(u) = 2K exp(-2 Re(beta) u) / (1 - exp(-2 Re beta)) on [0, 1]."""
    u = np.asarray(u, dtype=float)
    return 2.0 * spec.K * np.exp(-2.0 * spec.a * u) / -math.expm1(-2.0 * spec.a)


class ToeplitzForm(NamedTuple):
    coefficients: np.ndarray
    matrix: np.ndarray
    det: float


def toeplitz_form(spec: ProgressionSpec) -> ToeplitzForm:
    """
    Fourier coefficients a_m = 2K / (2 Re beta + 2 pi i m) and det[a_{j-k}].

    Returns:
        ToeplitzForm with coefficients for m = -(N-1), ..., N-1
    """
    n = int(spec.N)
    m = np.arange(-(n - 1), n)
    coefficients = 2.0 * spec.K / (2.0 * spec.a + 2j * math.pi * m)
    j = np.arange(n)
    matrix = coefficients[(j[:, None] - j[None, :]) + (n - 1)]
    _, value = lu_logdet(matrix)
    return ToeplitzForm(coefficients=coefficients, matrix=matrix, det=float(value.real))


class HaarEstimate(NamedTuple):
    estimate: float
    stderr: float
    samples: int


def _haar_unitaries(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Haar-distributed U(n) samples: QR of a complex Ginibre matrix with the phases of diag(R) removed."""
    z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, None, :]


def haar_mc(spec: ProgressionSpec, samples: int, seed: int, threads: Optional[int] = None) -> HaarEstimate:
    """
    Monte Carlo value of (2K / (1 - e^{-2a}))^N E[exp(-(a/pi) sum_j theta_j)] over Haar U(N).

    Eigenangles theta_j are taken in [0, 2 pi). Batches draw from independent
    Philox streams spawned from one SeedSequence, so the estimate does not
    depend on the thread count.

    Args:
        spec: Progression with N <= 6
        samples: Number of unitaries, >= 10^4
        seed: Seed of the SeedSequence

    Returns:
        HaarEstimate(estimate, stderr, samples)
    """
    n = int(spec.N)
    if n > 6:
        raise DomainError(f"Haar Monte Carlo is meant for N <= 6, got {n}")
    if samples < 10_000:
        raise DomainError(f"need at least 10^4 samples, got {samples}")
    sizes = [HAAR_BATCH] * (samples // HAAR_BATCH)
    if samples % HAAR_BATCH:
        sizes.append(samples % HAAR_BATCH)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def batch(job: Tuple[np.random.SeedSequence, int]) -> np.ndarray:
        seq, count = job
        rng = np.random.Generator(np.random.Philox(seq))
        eigs = np.linalg.eigvals(_haar_unitaries(rng, count, n))
        angles = np.mod(np.angle(eigs), 2.0 * math.pi)
        return np.exp(-(spec.a / math.pi) * angles.sum(axis=-1))

    values = np.concatenate(parallel_map(batch, list(zip(streams, sizes)), threads))
    prefactor = (2.0 * spec.K / -math.expm1(-2.0 * spec.a)) ** n
    mean = ordered_sum(values) / values.size
    stderr = float(np.std(values, ddof=1)) / math.sqrt(values.size)
    return HaarEstimate(estimate=prefactor * mean, stderr=prefactor * stderr, samples=int(values.size))


class GrowthRow(NamedTuple):
    N: int
    root: float
    gap: float


@dataclass(frozen=True)
class GrowthReport:
    """
    D_N^{1/N} against the limit K / sinh(Re beta).

    C is fitted on the first fit_count rows (the smaller N); the envelope
    gap <= C N^{-1/3} is then tested on the remaining rows.
    """

    rows: List[GrowthRow]
    limit: float
    fitted_C: float
    slope: float
    fit_count: int

    @classmethod
    def from_rows(cls, rows: Sequence[GrowthRow], limit: float, C: Optional[float] = None) -> "GrowthReport":
        rows = list(rows)
        if len(rows) < 2:
            raise DomainError(f"growth report needs at least two rows, got {len(rows)}")
        ns = np.array([row.N for row in rows], dtype=float)
        gaps = np.array([row.gap for row in rows])
        fit_count = len(rows) // 2
        if C is None:
            C = float(np.max(gaps[:fit_count] * ns[:fit_count] ** (1.0 / 3.0)))
        slope = float(np.polyfit(np.log(ns), np.log(gaps), 1)[0])
        return cls(rows=rows, limit=limit, fitted_C=float(C), slope=slope, fit_count=fit_count)

    @property
    def gaps_decreasing(self) -> bool:
        gaps = [row.gap for row in self.rows]
        return all(later < earlier for earlier, later in zip(gaps, gaps[1:]))

    @property
    def envelope_ratios(self) -> List[float]:
        """gap / (C N^{-1/3}) on the held-out rows."""
        return [row.gap * row.N ** (1.0 / 3.0) / self.fitted_C for row in self.rows[self.fit_count :]]

    @property
    def within_envelope(self) -> bool:
        return all(row.gap * row.N ** (1.0 / 3.0) <= self.fitted_C for row in self.rows[self.fit_count :])


def growth_check(
    beta: complex,
    K: float,
    Ns: Sequence[int] = (4, 8, 16, 32, 64),
    C: Optional[float] = None,
) -> GrowthReport:
    """
    Tabulate |log D_N^{1/N} - log(K / sinh Re beta)| over increasing N.

    Args:
        beta: Progression offset, Re beta > 0
        K: Half period
        Ns: At least two increasing sizes
        C: Envelope constant; fitted on the smaller half of Ns when omitted

    Returns:
        GrowthReport with the least-squares log-log slope of the gaps
    """
    Ns = [int(n) for n in Ns]
    if len(Ns) < 2 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise DomainError(f"growth check needs at least two increasing N values, got {Ns}")
    limit = K / math.sinh(complex(beta).real)
    rows = []
    for n in Ns:
        spec = ProgressionSpec(beta, K, n)
        log_root = cauchy_logdet(progression(spec)) / n
        rows.append(GrowthRow(N=n, root=math.exp(log_root), gap=abs(log_root - math.log(limit))))
    report = GrowthReport.from_rows(rows, limit, C)
    logger.info("growth check: limit=%.10g C=%.4g slope=%.3f", limit, report.fitted_C, report.slope)
    return report
