"""
Finite linear systems (-A, B, C) with diagonal generator.

A realization produces the symbol phi(x) = C exp(-xA) B, the operator R_x of
the Hankel operator restricted to (x, oo), the Gramians L_x and Q_x^sigma, the
resolvent kernel and the block Gelfand-Levitan solution whose diagonal trace is
the log-derivative of tau.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import DomainError, NearSingularError, SingularMatrixError
from .numkit import half_line_grid, lu_logdet, ordered_sum, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "DiagonalRealization",
    "TauCurve",
    "GLBlocks",
    "rx_matrix",
    "gramians",
    "tau_from_gramians",
    "resolvent_kernel",
    "resolvent_trace",
    "gl_block_solution",
    "gl_residual",
    "integrable_f",
    "rx_squared_kernel",
    "rx_squared_matrix",
    "integrable_inverse",
    "tau_from_resolvent",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class DiagonalRealization:
    """
    Linear system with A = diag(lambdas).

    Attributes:
        lambdas: Generator spectrum, shape (N,), Re > 0
        b: Input map, shape (N, m)
        c: Output map, shape (p, N)
        signature: +-1 entries acting on the output space, shape (p,)
    """

    lambdas: np.ndarray
    b: np.ndarray
    c: np.ndarray
    signature: Optional[np.ndarray] = None

    def __post_init__(self):
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=complex))
        b = np.asarray(self.b, dtype=complex).reshape(lambdas.size, -1) if lambdas.size else np.zeros((0, 1), complex)
        c = np.asarray(self.c, dtype=complex)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        if lambdas.size == 0:
            c = c.reshape(c.shape[0] if c.size else 1, 0)
        if c.shape[1] != lambdas.size:
            raise DomainError(f"output map has {c.shape[1]} columns for {lambdas.size} states")
        if np.any(lambdas.real <= 0.0):
            raise DomainError("generator spectrum must satisfy Re lambda > 0", tag="semigroup")
        signature = np.ones(c.shape[0]) if self.signature is None else np.asarray(self.signature, dtype=float)
        if signature.shape != (c.shape[0],) or not np.all(np.isin(signature, (-1.0, 1.0))):
            raise DomainError("signature must be a +-1 vector matching the output channels")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "signature", signature)

    @property
    def n_states(self) -> int:
        return self.lambdas.size

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    @classmethod
    def scalar(cls, lambdas: Sequence[complex], xis: Sequence[complex]) -> "DiagonalRealization":
        """Single-channel system with B = xi column and C = summation row."""
        lambdas = np.asarray(lambdas, dtype=complex)
        return cls(lambdas, np.asarray(xis, dtype=complex).reshape(-1, 1), np.ones((1, lambdas.size)))

    def decay(self, x: float) -> np.ndarray:
        return np.exp(-self.lambdas * x)

    def symbol_value(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """phi(x) = C exp(-xA) B, shape x.shape + (p, m)."""
        x = np.asarray(x, dtype=float)
        weights = np.exp(-np.multiply.outer(x, self.lambdas))
        return np.einsum("pn,...n,nm->...pm", self.c, weights, self.b)


@dataclass(frozen=True)
class TauCurve:
    """Samples of tau(t) and optionally sigma(t) = d/dt log tau(t)."""

    ts: np.ndarray
    taus: np.ndarray
    sigmas: Optional[np.ndarray] = None

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        taus = np.asarray(self.taus)
        if ts.ndim != 1 or taus.shape != ts.shape:
            raise DomainError("ts and taus must be 1-d arrays of equal length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0.0):
            raise DomainError("ts must be strictly increasing")
        sigmas = None if self.sigmas is None else np.asarray(self.sigmas)
        if sigmas is not None and sigmas.shape != ts.shape:
            raise DomainError("sigmas must match ts")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "sigmas", sigmas)

    @classmethod
    def from_function(
        cls,
        ts: Sequence[float],
        tau: Callable[[float], complex],
        sigma: Optional[Callable[[float], complex]] = None,
        threads: Optional[int] = None,
    ) -> "TauCurve":
        """Evaluate tau (and sigma) on a grid; results are assembled in grid order."""
        ts = np.asarray(ts, dtype=float)
        taus = np.asarray(parallel_map(tau, ts, threads))
        sigmas = None if sigma is None else np.asarray(parallel_map(sigma, ts, threads))
        return cls(ts, _squeeze_real(taus), None if sigmas is None else _squeeze_real(sigmas))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.taus) or (self.sigmas is not None and np.iscomplexobj(self.sigmas))

    def columns(self) -> dict:
        """Ordered CSV columns; complex curves get *_imag companions."""
        cols = {"t": self.ts}
        if self.is_complex:
            cols["tau"] = np.real(self.taus)
            if self.sigmas is not None:
                cols["sigma"] = np.real(self.sigmas)
            cols["tau_imag"] = np.imag(self.taus)
            if self.sigmas is not None:
                cols["sigma_imag"] = np.imag(self.sigmas)
        else:
            cols["tau"] = self.taus
            if self.sigmas is not None:
                cols["sigma"] = self.sigmas
        return cols


def _squeeze_real(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if np.iscomplexobj(values) and np.all(np.abs(values.imag) <= tol * np.maximum(1.0, np.abs(values.real))):
        return values.real.copy()
    return values


def _check_x(x: float) -> None:
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x}")


def _weighted_cauchy(lam_left: np.ndarray, lam_right: np.ndarray, x: float) -> np.ndarray:
    total = lam_left[:, None] + lam_right[None, :]
    if np.any(total == 0):
        raise DomainError("lambda_j + lambda_k vanishes; generator spectrum must lie in Re > 0")
    return np.exp(-total * x) / total


def rx_matrix(sys: DiagonalRealization, x: float) -> np.ndarray:
    """
    Matrix of R_x = int_x^oo exp(-sA) B C exp(-sA) ds.

    Entry (j, k) is (BC)_jk exp(-(lambda_j + lambda_k) x) / (lambda_j + lambda_k);
    for a scalar symbol (BC)_jk = xi_j.
    """
    _check_x(x)
    if sys.n_inputs != sys.n_outputs:
        raise DomainError(f"R_x needs a square symbol, got {sys.n_outputs}x{sys.n_inputs}")
    return (sys.b @ sys.c) * _weighted_cauchy(sys.lambdas, sys.lambdas, x)


def gramians(sys: DiagonalRealization, x: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Controllability and signed observability Gramians on (x, oo).

    Returns:
        (L_x, Q_x^sigma); L_x is signature-free
    """
    _check_x(x)
    lam = sys.lambdas
    lx = (sys.b @ sys.b.conj().T) * _weighted_cauchy(lam, lam.conj(), x)
    qx = (sys.c.conj().T @ (sys.signature[:, None] * sys.c)) * _weighted_cauchy(lam.conj(), lam, x)
    return lx, qx


def tau_from_gramians(sys: DiagonalRealization, x: float) -> complex:
    """tau(x) = det(I - Q_x^sigma L_x)."""
    lx, qx = gramians(sys, x)
    _, value = lu_logdet(np.eye(sys.n_states) - qx @ lx)
    return value


def _solve_checked(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if matrix.size == 0:
        return rhs
    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond):
        raise SingularMatrixError(f"{what} is singular")
    if cond > COND_LIMIT:
        raise NearSingularError(f"{what} is near-singular (cond={cond:.3e})", cond=cond)
    return linalg.solve(matrix, rhs)


def resolvent_kernel(sys: DiagonalRealization, lam: complex, x: float, y: float) -> Union[complex, np.ndarray]:
    """
    T_lam(x, y) = -lam C exp(-xA) (I + lam R_x)^{-1} exp(-yA) B.

    Returns:
        complex for a scalar symbol, else a (p, m) array
    """
    rx = rx_matrix(sys, x)
    n = sys.n_states
    solved = _solve_checked(np.eye(n) + lam * rx, sys.decay(y)[:, None] * sys.b, "I + lam R_x")
    value = -lam * (sys.c * sys.decay(x)[None, :]) @ solved
    if value.shape == (1, 1):
        return complex(value[0, 0])
    return value


def resolvent_trace(sys: DiagonalRealization, x: float) -> complex:
    """trace T_{-1}(x, x) = d/dx log det(I - R_x)."""
    value = resolvent_kernel(sys, -1.0, x, x)
    return complex(np.trace(np.atleast_2d(value)))


@dataclass(frozen=True)
class GLBlocks:
    """Blocks of the Gelfand-Levitan solution G(x, y) = [[U, V], [T, zeta]]."""

    U: np.ndarray
    V: np.ndarray
    T: np.ndarray
    zeta: np.ndarray

    @property
    def G(self) -> np.ndarray:
        return np.block([[self.U, self.V], [self.T, self.zeta]])

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.U) + np.trace(self.zeta))


def _gl_factors(sys: DiagonalRealization, x: float):
    lx, qx = gramians(sys, x)
    n = sys.n_states
    eye = np.eye(n)
    ex = sys.decay(x)
    # (I - LQ)^{-1} and (I - QL)^{-1} applied to the state-space blocks
    inv_lq = _solve_checked(eye - lx @ qx, eye, "I - L_x Q_x")
    inv_ql = _solve_checked(eye - qx @ lx, eye, "I - Q_x L_x")
    return lx, qx, ex, inv_lq, inv_ql


def gl_block_solution(sys: DiagonalRealization, x: float, y: float) -> GLBlocks:
    """
    Solution of the block Gelfand-Levitan equation at (x, y).

    U = C e^{-xA} (I - LQ)^{-1} L e^{-yA*} C* sigma
    V = -C e^{-xA} (I - LQ)^{-1} e^{-yA} B
    T = -B* e^{-xA*} (I - QL)^{-1} e^{-yA*} C*
    zeta = B* e^{-xA*} (I - QL)^{-1} Q e^{-yA} B
    """
    lx, qx, ex, inv_lq, inv_ql = _gl_factors(sys, x)
    ey = sys.decay(y)
    c_x = sys.c * ex[None, :]
    bh_x = sys.b.conj().T * ex.conj()[None, :]
    ch_y = ey.conj()[:, None] * sys.c.conj().T
    b_y = ey[:, None] * sys.b
    sigma = sys.signature
    u_block = c_x @ inv_lq @ lx @ ch_y * sigma[None, :]
    v_block = -c_x @ inv_lq @ b_y
    t_block = -bh_x @ inv_ql @ ch_y
    zeta_block = bh_x @ inv_ql @ qx @ b_y
    return GLBlocks(U=u_block, V=v_block, T=t_block, zeta=zeta_block)


def gl_residual(sys: DiagonalRealization, x: float, y: float, panels: Optional[int] = None) -> float:
    """
    Max-norm residual of the block Gelfand-Levitan equation at (x, y).

    The equation reads G(x, y) + Omega(x + y) + int_x^oo G(x, w) * Phi(w + y) dw = 0
    with Omega = [[0, phi], [phi*, 0]] and the block product
    [[V phi* sigma, U phi], [zeta phi*, T sigma phi]].
    """
    rate = 2.0 * float(np.min(sys.lambdas.real))
    grid = half_line_grid(x, rate, panels=panels)
    sigma = np.diag(sys.signature)
    acc_u = np.zeros((sys.n_outputs, sys.n_outputs), complex)
    acc_v = np.zeros((sys.n_outputs, sys.n_inputs), complex)
    acc_t = np.zeros((sys.n_inputs, sys.n_outputs), complex)
    acc_z = np.zeros((sys.n_inputs, sys.n_inputs), complex)
    terms_u, terms_v, terms_t, terms_z = [], [], [], []
    for w, weight in zip(grid.nodes, grid.weights):
        g = gl_block_solution(sys, x, w)
        phi = sys.symbol_value(w + y)
        phi_h = phi.conj().T
        terms_u.append(weight * (g.V @ phi_h @ sigma))
        terms_v.append(weight * (g.U @ phi))
        terms_t.append(weight * (g.zeta @ phi_h))
        terms_z.append(weight * (g.T @ sigma @ phi))
    for acc, terms in ((acc_u, terms_u), (acc_v, terms_v), (acc_t, terms_t), (acc_z, terms_z)):
        stacked = np.asarray(terms)
        for idx in np.ndindex(acc.shape):
            acc[idx] = ordered_sum(stacked[(slice(None),) + idx])
    g = gl_block_solution(sys, x, y)
    phi = sys.symbol_value(x + y)
    blocks = (
        g.U + acc_u,
        g.V + phi + acc_v,
        g.T + phi.conj().T + acc_t,
        g.zeta + acc_z,
    )
    return max(float(np.max(np.abs(block), initial=0.0)) for block in blocks)


def integrable_f(sys: DiagonalRealization, x: float) -> Callable[[complex, int], complex]:
    """
    f_x(u) = sum_k c_k b_k exp(-2 lambda_k x) / (u + lambda_k) and its derivative.

    The returned callable takes (u, order) with order 0 or 1.
    """
    if sys.n_inputs != 1 or sys.n_outputs != 1:
        raise DomainError("the integrable form of R_x^2 needs a scalar symbol")
    weights = sys.c[0] * sys.b[:, 0] * np.exp(-2.0 * sys.lambdas * x)

    def f(u: complex, order: int = 0) -> complex:
        denom = u + sys.lambdas
        if order == 0:
            return ordered_sum(weights / denom)
        return ordered_sum(-weights / denom**2)

    return f


def rx_squared_kernel(
    sys: DiagonalRealization,
    x: float,
    u: complex,
    t: complex,
    b_u: complex = 1.0,
    c_t: complex = 1.0,
) -> Tuple[complex, complex]:
    """
    Kernel of R_x^2 in integrable form at spectral points (u, t).

    k(u, t) = e^{-xu} b(u) (f_x(u) - f_x(t)) / (t - u) c(t) e^{-xt};
    on the diagonal the difference quotient becomes -f_x'(u).

    Returns:
        (kernel value, f_x(u))
    """
    f = integrable_f(sys, x)
    fu = f(u)
    if u == t:
        quotient = -f(u, 1)
    else:
        quotient = (fu - f(t)) / (t - u)
    return complex(np.exp(-x * u) * b_u * quotient * c_t * np.exp(-x * t)), fu


def rx_squared_matrix(sys: DiagonalRealization, x: float) -> np.ndarray:
    """R_x^2 assembled entrywise from the integrable kernel."""
    n = sys.n_states
    out = np.empty((n, n), complex)
    for j in range(n):
        for k in range(n):
            out[j, k], _ = rx_squared_kernel(sys, x, sys.lambdas[j], sys.lambdas[k], sys.b[j, 0], sys.c[0, k])
    return out


def integrable_inverse(sys: DiagonalRealization, lam: complex, x: float) -> Tuple[np.ndarray, float]:
    """
    L := (I - lam^2 R_x^2)^{-1} - I and the residual of (I + L)(I - lam^2 R_x^2) = I.
    """
    rx = rx_matrix(sys, x)
    eye = np.eye(sys.n_states)
    m = eye - lam**2 * (rx @ rx)
    inverse = _solve_checked(m, eye, "I - lam^2 R_x^2")
    big_l = inverse - eye
    residual = float(np.max(np.abs((eye + big_l) @ m - eye), initial=0.0))
    return big_l, residual


def tau_from_resolvent(sys: DiagonalRealization, t: float, tol: Optional[float] = None) -> complex:
    """
    tau(t) = exp(-int_t^oo trace T_{-1}(u, u) du).
    """
    _check_x(t)
    if sys.n_states == 0:
        return 1.0 + 0j
    rate = 2.0 * float(np.min(sys.lambdas.real))
    scale = max(1.0, abs(resolvent_trace(sys, t)))
    grid = half_line_grid(t, rate, tol=tol, scale=scale)
    integrand = np.array([resolvent_trace(sys, u) for u in grid.nodes])
    return complex(np.exp(-grid.integrate(integrand)))
