"""
Quadrature, dense complex linear algebra and the Fredholm-determinant oracle.

Operators on L^2(t, oo) are discretized by composite Gauss-Legendre panels on a
truncated interval (Nystrom method); determinants are taken on the symmetrized
matrix sqrt(w_i) K(x_i, x_j) sqrt(w_j) through an LU factorization.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from .config import settings
from .errors import ConvergenceError, DomainError, SingularMatrixError

logger = logging.getLogger(__name__)

__all__ = [
    "QuadGrid",
    "KernelMatrix",
    "ordered_sum",
    "gauss_legendre",
    "composite_gauss_legendre",
    "truncation_length",
    "half_line_grid",
    "kernel_matrix",
    "hankel_matrix",
    "lu_logdet",
    "fredholm_det",
    "det_plateau",
    "log_derivative",
    "parallel_map",
]

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def ordered_sum(values) -> Union[float, complex]:
    """Correctly rounded sum, independent of array layout and thread count."""
    arr = np.asarray(values).ravel()
    if np.iscomplexobj(arr):
        return complex(math.fsum(arr.real), math.fsum(arr.imag))
    return math.fsum(arr)


@dataclass(frozen=True)
class QuadGrid:
    """Quadrature nodes and weights on (a, b)."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: Tuple[float, float]
    panels: int = 1

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise DomainError("nodes and weights must be 1-d arrays of equal length")
        if np.any(weights <= 0.0):
            raise DomainError("quadrature weights must be positive")
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0.0):
            raise DomainError("quadrature nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def integrate(self, values) -> Union[float, complex]:
        return ordered_sum(self.weights * np.asarray(values))

    def summary(self) -> Dict[str, Any]:
        """Truncation record for run manifests."""
        per_panel = len(self) // self.panels
        return {"L": self.length, "domain": list(self.domain), "panels": self.panels, "nodes": per_panel}


@dataclass(frozen=True)
class KernelMatrix:
    """Nystrom discretization of an integral operator."""

    entries: np.ndarray
    grid: QuadGrid
    symmetrized: bool = True

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] != len(self.grid):
            raise DomainError(f"kernel matrix shape {entries.shape} does not match {len(self.grid)} nodes")
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.entries), initial=0.0)))
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol * scale)

    def det(self, z: complex = -1.0) -> complex:
        """det(I + z M)."""
        _, value = lu_logdet(np.eye(self.size) + z * self.entries)
        return value

    def compose(self, other: "KernelMatrix") -> "KernelMatrix":
        """Matrix of the composed operator on the same grid."""
        if other.grid is not self.grid and not np.array_equal(other.grid.nodes, self.grid.nodes):
            raise DomainError("kernel matrices live on different grids")
        return KernelMatrix(self.entries @ other.entries, self.grid, self.symmetrized)


def gauss_legendre(n: int, a: float, b: float) -> QuadGrid:
    """
    Gauss-Legendre rule with n nodes on (a, b).

    Args:
        n: Number of nodes, n >= 1
        a: Left endpoint
        b: Right endpoint, b > a

    Returns:
        QuadGrid exact for polynomials of degree <= 2n - 1
    """
    if int(n) < 1:
        raise DomainError(f"Gauss-Legendre rule needs n >= 1, got {n}")
    if not a < b:
        raise DomainError(f"empty interval ({a}, {b})")
    x, w = legendre.leggauss(int(n))
    half = 0.5 * (b - a)
    return QuadGrid(nodes=half * x + 0.5 * (a + b), weights=half * w, domain=(float(a), float(b)))


def composite_gauss_legendre(a: float, b: float, panels: int, nodes: Optional[int] = None) -> QuadGrid:
    """Gauss-Legendre on equal panels of (a, b)."""
    if int(panels) < 1:
        raise DomainError(f"need at least one panel, got {panels}")
    if not a < b:
        raise DomainError(f"empty interval ({a}, {b})")
    nodes = settings.panel_nodes if nodes is None else int(nodes)
    x, w = legendre.leggauss(nodes)
    edges = np.linspace(a, b, int(panels) + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    all_nodes = (half[:, None] * x[None, :] + mid[:, None]).ravel()
    all_weights = (half[:, None] * w[None, :]).ravel()
    return QuadGrid(nodes=all_nodes, weights=all_weights, domain=(float(a), float(b)), panels=int(panels))


def truncation_length(decay_rate: float, tol: Optional[float] = None, scale: float = 1.0) -> float:
    """Smallest L with scale * exp(-decay_rate * L) < tol."""
    if not decay_rate > 0.0:
        raise DomainError(f"decay rate must be positive, got {decay_rate}", tag="decay-rate")
    tol = settings.tail_tol if tol is None else tol
    return max(0.0, math.log(max(scale, tol) / tol) / decay_rate)


def half_line_grid(
    t: float,
    decay_rate: float,
    *,
    tol: Optional[float] = None,
    scale: float = 1.0,
    panel_length: float = 2.0,
    panels: Optional[int] = None,
    nodes: Optional[int] = None,
) -> QuadGrid:
    """
    Composite grid on (t, t + L) for a kernel decaying like exp(-decay_rate * x).

    Args:
        t: Left endpoint of the half line
        decay_rate: Exponential decay rate of the kernel in each variable
        tol: Tail tolerance, defaults to the configured tail_tol
        scale: Bound on the kernel magnitude near t
        panel_length: Target panel length when panels is not given
        panels: Explicit panel count
        nodes: Nodes per panel

    Returns:
        QuadGrid with domain (t, t + L)
    """
    length = truncation_length(decay_rate, tol, scale)
    length = max(length, panel_length)
    if panels is None:
        panels = max(1, math.ceil(length / panel_length))
    grid = composite_gauss_legendre(t, t + length, panels, nodes)
    logger.info("half-line grid: L=%.4g panels=%d nodes=%d", length, panels, len(grid))
    return grid


def _first_bad_pair(values: np.ndarray) -> Tuple[int, int]:
    bad = np.argwhere(~np.isfinite(values))
    return int(bad[0][0]), int(bad[0][1])


def kernel_matrix(kernel: Kernel, grid: QuadGrid) -> KernelMatrix:
    """Symmetrized Nystrom matrix of a vectorized kernel K(x, y)."""
    x = grid.nodes
    values = np.broadcast_to(kernel(x[:, None], x[None, :]), (x.size, x.size))
    if not np.all(np.isfinite(values)):
        i, j = _first_bad_pair(values)
        raise DomainError(
            f"kernel is not finite at nodes ({x[i]:.17g}, {x[j]:.17g})",
            tag="kernel-value",
            context={"i": i, "j": j},
        )
    root = np.sqrt(grid.weights)
    return KernelMatrix(root[:, None] * values * root[None, :], grid)


def hankel_matrix(symbol: Callable[[np.ndarray], np.ndarray], grid: QuadGrid) -> KernelMatrix:
    """
    Symmetrized matrix of the Hankel operator with symbol phi.

    Args:
        symbol: Vectorized phi, evaluated at all node sums x_i + x_j
        grid: Quadrature grid

    Returns:
        KernelMatrix with entries sqrt(w_i) phi(x_i + x_j) sqrt(w_j)
    """
    x = grid.nodes
    values = np.broadcast_to(symbol(x[:, None] + x[None, :]), (x.size, x.size))
    if not np.all(np.isfinite(values)):
        i, j = _first_bad_pair(values)
        raise DomainError(
            f"symbol is not finite at node pair ({x[i]:.17g}, {x[j]:.17g})",
            tag="hankel-symbol",
            context={"i": i, "j": j},
        )
    root = np.sqrt(grid.weights)
    return KernelMatrix(root[:, None] * values * root[None, :], grid)


def lu_logdet(matrix: np.ndarray) -> Tuple[complex, complex]:
    """
    Log-determinant through LU with partial pivoting.

    The logarithm is the sum of principal logs of the pivots plus i*pi per
    row interchange, so it tracks the branch of the determinant.

    Returns:
        (log det, det)
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if n == 0:
        return 0j, 1.0 + 0j
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(matrix)
    pivots = np.diag(lu).astype(complex)
    zero = np.flatnonzero(pivots == 0)
    if zero.size:
        raise SingularMatrixError(f"exactly zero pivot at row {int(zero[0])}", context={"row": int(zero[0])})
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    if not np.any(pivots.imag):
        # real factorization: keep the determinant exactly real
        negatives = int(np.count_nonzero(pivots.real < 0.0)) + swaps
        logabs = ordered_sum(np.log(np.abs(pivots.real)))
        sign = -1.0 if negatives % 2 else 1.0
        return complex(logabs, math.pi if sign < 0 else 0.0), complex(sign * math.exp(logabs), 0.0)
    logdet = ordered_sum(np.log(pivots)) + 1j * math.pi * swaps
    return logdet, complex(np.exp(logdet))


def fredholm_det(
    kernel: Kernel,
    domain: Union[QuadGrid, Tuple[float, float]],
    z: complex = -1.0,
    *,
    decay_rate: Optional[float] = None,
    panels: Optional[int] = None,
    panel_length: float = 2.0,
    nodes: Optional[int] = None,
    tol: Optional[float] = None,
) -> complex:
    """
    det(I + z K) on L^2(domain) by the Nystrom method.

    Args:
        kernel: Vectorized K(x, y)
        domain: A QuadGrid, or (a, b) where b may be math.inf
        z: Spectral parameter; z = -1 gives det(I - K)
        decay_rate: Exponential decay rate, required when b is infinite
        panels: Panel count override
        panel_length: Target panel length for automatic panelization
        nodes: Nodes per panel
        tol: Tail tolerance

    Returns:
        Complex determinant
    """
    if isinstance(domain, QuadGrid):
        grid = domain
    else:
        a, b = domain
        if math.isinf(b):
            if decay_rate is None:
                raise DomainError("infinite domain needs a decay rate for truncation", tag="decay-rate")
            grid = half_line_grid(a, decay_rate, tol=tol, panels=panels, panel_length=panel_length, nodes=nodes)
        else:
            if panels is None:
                panels = max(1, math.ceil((b - a) / panel_length))
            grid = composite_gauss_legendre(a, b, panels, nodes)
    return kernel_matrix(kernel, grid).det(z)


def det_plateau(
    builder: Callable[[int], complex],
    start_panels: int,
    tol: float = 1e-10,
    max_doublings: int = 4,
    label: str = "determinant",
) -> Tuple[complex, int, List[complex]]:
    """
    Double the panel count until successive determinants agree.

    Args:
        builder: Maps a panel count to a determinant value
        start_panels: Initial panel count
        tol: Plateau tolerance on |d_2n - d_n|
        max_doublings: Give up after this many doublings
        label: Name used in log messages

    Returns:
        (value at the finest grid, panels used, history of values)
    """
    panels = int(start_panels)
    history = [builder(panels)]
    for _ in range(max_doublings):
        panels *= 2
        history.append(builder(panels))
        change = abs(history[-1] - history[-2])
        logger.info("%s plateau: panels=%d change=%.3e", label, panels, change)
        if change < tol:
            return history[-1], panels, history
    raise ConvergenceError(
        f"{label} did not plateau below {tol:g} after {max_doublings} doublings",
        context={"history": [complex(v) for v in history]},
    )


def parallel_map(fn: Callable, items, threads: Optional[int] = None) -> list:
    """Map fn over items on a thread pool; results keep the input order."""
    items = list(items)
    threads = settings.threads if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as executor:
        return list(executor.map(fn, items))


def _tau_value(samples, t: float) -> complex:
    if callable(samples):
        return complex(samples(t))
    ts = np.asarray(samples.ts, dtype=float)
    hits = np.flatnonzero(np.isclose(ts, t, rtol=0.0, atol=1e-12))
    if hits.size == 0:
        raise DomainError(f"t={t} is not a sample point", tag="stencil")
    return complex(np.asarray(samples.taus)[hits[0]])


def log_derivative(samples, t: float, h: float = 1e-4) -> Union[float, complex]:
    """
    Centered difference of log tau at t, error O(h^2).

    Args:
        samples: A TauCurve (stencil taken from neighbouring samples) or a
            callable tau(t) (stencil t +- h)
        t: Evaluation point, interior to the sample range
        h: Step for callables

    Returns:
        d/dt log tau(t); real when tau is real
    """
    if callable(samples):
        left, right = t - h, t + h
        tau_left, tau_right = _tau_value(samples, left), _tau_value(samples, right)
    else:
        ts = np.asarray(samples.ts, dtype=float)
        hits = np.flatnonzero(np.isclose(ts, t, rtol=0.0, atol=1e-12))
        if hits.size == 0 or hits[0] == 0 or hits[0] == ts.size - 1:
            raise DomainError(f"t={t} has no centered stencil in the sample range", tag="stencil")
        i = int(hits[0])
        left, right = ts[i - 1], ts[i + 1]
        if not math.isclose(right - t, t - left, rel_tol=1e-9):
            raise DomainError(f"stencil around t={t} is not symmetric", tag="stencil")
        taus = np.asarray(samples.taus)
        tau_left, tau_right = complex(taus[i - 1]), complex(taus[i + 1])
    real = tau_left.imag == 0.0 and tau_right.imag == 0.0
    if real and (tau_left.real <= 0.0 or tau_right.real <= 0.0):
        raise DomainError(f"tau <= 0 on the stencil around t={t}; log undefined", tag="log-domain")
    if tau_left == 0 or tau_right == 0:
        raise DomainError(f"tau vanishes on the stencil around t={t}", tag="log-domain")
    value = np.log(tau_right / tau_left) / (right - left)
    return float(value.real) if real else complex(value)
