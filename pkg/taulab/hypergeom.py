"""
Hypergeometric kernel K(x, y) = <J Psi(x), Psi(y)> / (x - y) on (1, oo).

Psi solves dPsi/dl = W(l) Psi with W = [[0, g0], [-ab g1, 0]] and
g_i(l) = l^{-c_i} (l - 1)^{c_i - 1}. The bounded solution is seeded at a
large l by the decaying Liouville-Green branch of the hypergeometric
equation and integrated inward in s = log l. Each g_i is a Stieltjes
transform of a positive measure on [-1, 0], which splits K into a
difference of two positive kernels.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .errors import DomainError, IntegrationError
from .models import HgParams
from .numkit import KernelMatrix, det_plateau, half_line_grid

logger = logging.getLogger(__name__)

__all__ = [
    "HypergeometricSolution",
    "LoewnerDiagonal",
    "w_matrix",
    "loewner_function",
    "q_potential",
    "lg_seed",
    "integrate_system",
    "loewner_measure",
    "loewner_rep",
    "loewner_diagonal",
    "kernel_k5",
    "derivative_identity_residual",
    "signature_split",
    "fredholm_matrix",
    "fredholm_plateau",
    "kernel_spectrum",
]

LAMBDA_START = 1e8
JACOBI_NODES = 96


def _check_lambda(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 1.0):
        raise DomainError(f"lambda must exceed 1, got min {float(np.min(lam))}", tag="hypergeom-domain")
    return lam


def loewner_function(c: float, lam):
    """g_c(l) = l^{-c} (l - 1)^{c - 1}."""
    lam = _check_lambda(lam)
    return lam ** (-c) * (lam - 1.0) ** (c - 1.0)


def w_matrix(p: HgParams, lam: float) -> np.ndarray:
    """W(l) = [[0, l^{-c0} (l-1)^{-c1}], [-ab l^{c0-1} (l-1)^{c1-1}, 0]]."""
    lam = float(_check_lambda(lam))
    upper = lam ** (-p.c0) * (lam - 1.0) ** (-p.c1)
    lower = -p.ab * lam ** (p.c0 - 1.0) * (lam - 1.0) ** (p.c1 - 1.0)
    return np.array([[0.0, upper], [lower, 0.0]])


def _q_parts(p: HgParams, lam: np.ndarray, langer: bool) -> Tuple[np.ndarray, np.ndarray]:
    c = p.c
    lm1 = lam - 1.0
    prod = lam * lm1
    q = -p.ab / prod + 0.25 * ((c * c - 2.0 * c) / lam**2 + 2.0 * c * (1.0 - c) / prod + (c * c - 1.0) / lm1**2)
    d_prod = -(2.0 * lam - 1.0) / prod**2
    dq = -p.ab * d_prod + 0.25 * (
        -2.0 * (c * c - 2.0 * c) / lam**3 + 2.0 * c * (1.0 - c) * d_prod - 2.0 * (c * c - 1.0) / lm1**3
    )
    if langer:
        q = q + 0.25 / lam**2
        dq = dq - 0.5 / lam**3
    return q, dq


def q_potential(p: HgParams, lam) -> np.ndarray:
    """
    Normal-form potential of the hypergeometric equation.

    q = -ab/(l(l-1)) + ((c^2 - 2c)/l^2 + 2c(1-c)/(l(l-1)) + (c^2 - 1)/(l-1)^2)/4,
    asymptotic to (-ab - 1/4)/l^2.
    """
    lam = _check_lambda(lam)
    q, _ = _q_parts(p, lam, langer=False)
    return q


def _lg_exponent(p: HgParams, lam: float, langer: bool) -> float:
    """int_2^l sqrt(q(x)) dx, integrated in log x."""

    def integrand(s: float) -> float:
        x = math.exp(s)
        q, _ = _q_parts(p, np.asarray(x), langer)
        return math.sqrt(float(q)) * x

    value, _ = integrate.quad(integrand, math.log(2.0), math.log(lam), epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def lg_seed(p: HgParams, lam: float, langer: bool = True) -> np.ndarray:
    """
    Decaying Liouville-Green branch as a state vector of dPsi/dl = W Psi.

    f = P q^{-1/4} exp(-int_2^l sqrt(q)) with P = l^{-c/2} (l-1)^{-(1-c)/2};
    Psi = (f, l^{c0} (l-1)^{c1} f'). With langer=True the potential is
    q + 1/(4 l^2), whose square root is exactly sqrt(-ab)/l at infinity.
    """
    lam = float(_check_lambda(lam))
    if lam < 2.0:
        raise DomainError(f"Liouville-Green seed is taken at l >= 2, got {lam}")
    q, dq = _q_parts(p, np.asarray(lam), langer)
    q, dq = float(q), float(dq)
    if q <= 0.0:
        raise DomainError(f"potential is not positive at l = {lam}", tag="hypergeom-domain")
    c = p.c
    log_p = -0.5 * c * math.log(lam) - 0.5 * (1.0 - c) * math.log(lam - 1.0)
    dlog_p = -0.5 * c / lam - 0.5 * (1.0 - c) / (lam - 1.0)
    log_f = log_p - 0.25 * math.log(q) - _lg_exponent(p, lam, langer)
    f = math.exp(log_f)
    df = f * (dlog_p - dq / (4.0 * q) - math.sqrt(q))
    return np.array([f, lam**p.c0 * (lam - 1.0) ** p.c1 * df])


@dataclass(frozen=True)
class HypergeometricSolution:
    """
    Dense solution of dPsi/dl = W Psi on [lam_end, lam_start].

    Attributes:
        params: Kernel parameters
        solution: scipy OdeSolution in s = log l
        lam_start: Seed point
        lam_end: Innermost point reached
        seed: State at lam_start
    """

    params: HgParams
    solution: object
    lam_start: float
    lam_end: float
    seed: np.ndarray

    def psi(self, lam) -> np.ndarray:
        """Psi at lam (any shape), result shape lam.shape + (2,)."""
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < self.lam_end * (1.0 - 1e-12)) or np.any(lam > self.lam_start * (1.0 + 1e-12)):
            raise DomainError(
                f"lambda outside the integrated window [{self.lam_end}, {self.lam_start}]",
                tag="hypergeom-window",
            )
        values = self.solution(np.log(lam).ravel())
        return values.T.reshape(lam.shape + (2,))

    def residual(self, lam: float, h: float = 1e-2) -> float:
        """Relative ||Psi' - W Psi|| with a five-point derivative of the dense output in log l."""
        s = math.log(lam) + h * np.array([-2.0, -1.0, 1.0, 2.0])
        values = self.solution(s)
        d_ds = (values[:, 0] - 8.0 * values[:, 1] + 8.0 * values[:, 2] - values[:, 3]) / (12.0 * h)
        psi = self.psi(lam)
        rhs = lam * (w_matrix(self.params, lam) @ psi)
        return float(np.linalg.norm(d_ds - rhs) / max(np.linalg.norm(rhs), np.linalg.norm(psi)))

    def decay_integrals(self, lower: float = 2.0, windows: int = 6) -> List[float]:
        """Partial integrals of x ||Psi(x)||^2 over [lower, 2^k lower]."""
        values = []
        partial = 0.0
        a = lower
        for _ in range(windows):
            b = min(2.0 * a, self.lam_start)

            def integrand(s: float) -> float:
                x = math.exp(s)
                return float(x * x * np.sum(self.psi(x) ** 2))

            piece, _ = integrate.quad(integrand, math.log(a), math.log(b), epsabs=1e-14, epsrel=1e-11)
            partial += piece
            values.append(partial)
            a = b
        return values

    def reversibility_error(self, lam_a: float, lam_b: float) -> float:
        """Integrate Psi(lam_a) out to lam_b and compare with the stored solution there."""
        out = _integrate(self.params, self.psi(lam_a), lam_a, lam_b, dense=False)
        end = out.y[:, -1]
        ref = self.psi(lam_b)
        return float(np.linalg.norm(end - ref) / np.linalg.norm(ref))

    def seed_consistency(self, factor: float = 2.0, langer: bool = True) -> float:
        """Relative gap between the integrated Psi and the Liouville-Green branch at lam_start / factor."""
        lam = self.lam_start / factor
        predicted = lg_seed(self.params, lam, langer)
        return float(np.linalg.norm(self.psi(lam) - predicted) / np.linalg.norm(predicted))


def _integrate(p: HgParams, state: np.ndarray, lam_from: float, lam_to: float, dense: bool):
    ab = p.ab

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        lam = math.exp(s)
        g0 = lam ** (-p.c0) * (lam - 1.0) ** (-p.c1)
        g1 = lam ** (p.c0 - 1.0) * (lam - 1.0) ** (p.c1 - 1.0)
        return lam * np.array([g0 * y[1], -ab * g1 * y[0]])

    scale = float(np.max(np.abs(state)))
    out = integrate.solve_ivp(
        rhs,
        (math.log(lam_from), math.log(lam_to)),
        np.asarray(state, dtype=float),
        method="DOP853",
        rtol=1e-12,
        atol=1e-14 * scale,
        dense_output=dense,
    )
    if out.status != 0:
        raise IntegrationError(
            f"ODE integration from {lam_from} to {lam_to} failed: {out.message}",
            context={"lam_from": lam_from, "lam_to": lam_to},
        )
    return out


def integrate_system(
    p: HgParams,
    lam_end: float,
    lam_start: float = LAMBDA_START,
    langer: bool = True,
) -> HypergeometricSolution:
    """
    Integrate the bounded solution from the Liouville-Green seed at lam_start down to lam_end.

    Args:
        p: Kernel parameters
        lam_end: Innermost point, > 1
        lam_start: Seed point, >= 2
        langer: Use the Langer-corrected potential in the seed

    Returns:
        HypergeometricSolution with dense output
    """
    _check_lambda(lam_end)
    if not lam_start > lam_end:
        raise DomainError(f"lam_start = {lam_start} must exceed lam_end = {lam_end}")
    seed = lg_seed(p, lam_start, langer)
    out = _integrate(p, seed, lam_start, lam_end, dense=True)
    logger.info("hypergeometric ODE: [%g, %g] steps=%d", lam_end, lam_start, out.t.size)
    return HypergeometricSolution(params=p, solution=out.sol, lam_start=lam_start, lam_end=lam_end, seed=seed)


def loewner_measure(c: float, n: int = JACOBI_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes on [-1, 0] and weights of sin(pi c)/pi (-u)^{-c} (1 + u)^{c-1} du.

    With u = (s - 1)/2 the density becomes the Jacobi weight (1 - s)^{-c} (1 + s)^{c-1}.
    c = 1 and c = 0 degenerate to unit point masses at u = 0 and u = -1.
    """
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"Loewner exponent must lie in [0, 1], got {c}")
    if c == 1.0:
        return np.array([0.0]), np.array([1.0])
    if c == 0.0:
        return np.array([-1.0]), np.array([1.0])
    s, w = special.roots_jacobi(int(n), -c, c - 1.0)
    return (s - 1.0) / 2.0, w * math.sin(math.pi * c) / math.pi


def loewner_rep(c0: float, lam: float, n: int = JACOBI_NODES) -> float:
    """(sin pi c0 / pi) int_{-1}^0 (-u)^{-c0} (1+u)^{c0-1} / (l + u) du, which equals g_{c0}(l)."""
    lam = float(_check_lambda(lam))
    u, w = loewner_measure(c0, n)
    return float(np.sum(w / (lam + u)))


class LoewnerDiagonal(NamedTuple):
    """Diagonal of (J W(x) + W(y)^T J)/(x - y): divided differences and their measure form."""

    direct: Tuple[float, float]
    represented: Tuple[float, float]

    @property
    def gap(self) -> float:
        return max(abs(a - b) for a, b in zip(self.direct, self.represented))


def loewner_diagonal(p: HgParams, x: float, y: float, n: int = JACOBI_NODES) -> LoewnerDiagonal:
    """
    ab (g1(x) - g1(y))/(x - y) and (g0(x) - g0(y))/(x - y) against
    -ab int w1(du)/((x+u)(y+u)) and -int w0(du)/((x+u)(y+u)).
    """
    if x == y:
        raise DomainError("divided differences need x != y")
    direct = (
        p.ab * (loewner_function(p.c1, x) - loewner_function(p.c1, y)) / (x - y),
        (loewner_function(p.c0, x) - loewner_function(p.c0, y)) / (x - y),
    )
    u1, w1 = loewner_measure(p.c1, n)
    u0, w0 = loewner_measure(p.c0, n)
    represented = (
        -p.ab * float(np.sum(w1 / ((x + u1) * (y + u1)))),
        -float(np.sum(w0 / ((x + u0) * (y + u0)))),
    )
    return LoewnerDiagonal(direct=(float(direct[0]), float(direct[1])), represented=represented)


def _kernel_from_psi(p: HgParams, xs: np.ndarray, ys: np.ndarray, psi_x: np.ndarray, psi_y: np.ndarray) -> np.ndarray:
    numerator = psi_x[..., 1] * psi_y[..., 0] * -1.0 + psi_x[..., 0] * psi_y[..., 1]
    diff = xs - ys
    same = diff == 0
    safe = np.where(same, 1.0, diff)
    # confluent limit <J Psi'(x), Psi(x)> = ab g1 Psi1^2 + g0 Psi2^2
    g0 = loewner_function(p.c0, xs)
    g1 = loewner_function(p.c1, xs)
    diagonal = p.ab * g1 * psi_x[..., 0] ** 2 + g0 * psi_x[..., 1] ** 2
    return np.where(same, diagonal, numerator / safe)


def kernel_k5(p: HgParams, sol: HypergeometricSolution, x, y) -> np.ndarray:
    """K(x, y) = <J Psi(x), Psi(y)> / (x - y), with the confluent limit on x = y."""
    xs, ys = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    value = _kernel_from_psi(p, xs, ys, sol.psi(xs), sol.psi(ys))
    return float(value) if value.ndim == 0 else value


def derivative_identity_residual(
    p: HgParams,
    sol: HypergeometricSolution,
    x: float,
    y: float,
    h: float = 1e-3,
) -> float:
    """
    Relative gap between (d/dx + d/dy)[(x - y) K] by a five-point difference
    along the diagonal and the Loewner-measure form
    (x - y) [D11 Psi1(x) Psi1(y) + D22 Psi2(x) Psi2(y)].
    """
    steps = h * np.array([-2.0, -1.0, 1.0, 2.0])
    values = kernel_k5(p, sol, x + steps, y + steps)
    lhs = (x - y) * (values[0] - 8.0 * values[1] + 8.0 * values[2] - values[3]) / (12.0 * h)
    diag = loewner_diagonal(p, x, y).represented
    psi_x, psi_y = sol.psi(x), sol.psi(y)
    rhs = (x - y) * (diag[0] * psi_x[0] * psi_y[0] + diag[1] * psi_x[1] * psi_y[1])
    return float(abs(lhs - rhs) / max(abs(rhs), 1e-300))


def signature_split(
    p: HgParams,
    sol: HypergeometricSolution,
    grid: Sequence[float],
    *,
    tol: Optional[float] = None,
    n_measure: int = JACOBI_NODES,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positive semidefinite parts (K0, K1) with K = K0 - K1 on grid x grid.

    K0(x, y) = int_0^oo int w0(du) Psi2(x+s) Psi2(y+s) / ((x+s+u)(y+s+u)) ds and
    K1 the same with -ab w1 and Psi1. Both are Gram matrices of explicit
    feature vectors, so they are positive semidefinite by construction.
    The s integral runs in r = log(1 + s).
    """
    xs = np.asarray(grid, dtype=float)
    rate = 2.0 * p.kappa + 1.0
    r_grid = half_line_grid(0.0, rate, tol=tol, panel_length=1.0, nodes=32)
    s = np.expm1(r_grid.nodes)
    ds = r_grid.weights * np.exp(r_grid.nodes)
    shifted = xs[:, None] + s[None, :]
    if np.max(shifted) > sol.lam_start:
        raise DomainError("s-integration window exceeds the integrated range; raise lam_start")
    psi = sol.psi(shifted)

    def part(c: float, weight: float, component: int) -> np.ndarray:
        u, w = loewner_measure(c, n_measure)
        denom = shifted[:, :, None] + u[None, None, :]
        features = psi[:, :, component, None] / denom * np.sqrt(weight * ds[None, :, None] * w[None, None, :])
        flat = features.reshape(xs.size, -1)
        return flat @ flat.T

    k0 = part(p.c0, 1.0, 1)
    k1 = part(p.c1, -p.ab, 0)
    return k0, k1


def fredholm_matrix(
    p: HgParams,
    sol: HypergeometricSolution,
    delta: float,
    panels: Optional[int] = None,
    *,
    tol: Optional[float] = None,
    nodes: int = 24,
) -> KernelMatrix:
    """
    Nystrom matrix of K P_(1+delta, oo) in u = log x.

    The unitary change of variables gives the kernel K(e^u, e^v) e^{(u+v)/2},
    which decays like exp(-(sqrt(-ab) + 1/2) u).
    """
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    start = math.log1p(delta)
    grid = half_line_grid(start, p.kappa + 0.5, tol=tol, panels=panels, panel_length=1.0, nodes=nodes)
    if math.exp(grid.domain[1]) > sol.lam_start or 1.0 + delta < sol.lam_end:
        raise DomainError("Fredholm window is not covered by the integrated solution", tag="hypergeom-window")

    x = np.exp(grid.nodes)
    psi = sol.psi(x)

    # Psi is sampled once per node; the kernel only pairs node values
    def kernel(i: np.ndarray, j: np.ndarray) -> np.ndarray:
        rows, cols = np.broadcast_arrays(i, j)
        values = _kernel_from_psi(p, x[rows], x[cols], psi[rows], psi[cols])
        return values * np.sqrt(x[rows] * x[cols])

    index = np.arange(x.size)
    values = kernel(index[:, None], index[None, :])
    if not np.all(np.isfinite(values)):
        raise DomainError("hypergeometric kernel is not finite on the grid", tag="kernel-value")
    root = np.sqrt(grid.weights)
    return KernelMatrix(root[:, None] * values * root[None, :], grid)


def fredholm_plateau(
    p: HgParams,
    sol: HypergeometricSolution,
    delta: float,
    start_panels: Optional[int] = None,
    tol: float = 1e-8,
) -> Tuple[float, int, List[complex]]:
    """det(I - K P_(1+delta, oo)) with panel doubling until successive values agree within tol."""
    if start_panels is None:
        start_panels = fredholm_matrix(p, sol, delta).grid.panels

    def builder(panels: int) -> complex:
        return fredholm_matrix(p, sol, delta, panels).det(-1.0)

    value, panels, history = det_plateau(builder, start_panels, tol=tol, label="hypergeometric kernel")
    return float(value.real), panels, history


def kernel_spectrum(matrix: KernelMatrix) -> np.ndarray:
    """Eigenvalues of the symmetrized discretization, ascending."""
    return np.linalg.eigvalsh(0.5 * (matrix.entries + matrix.entries.T))
