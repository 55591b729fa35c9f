"""
Linear pair of Painleve VI.

dPhi/dx = (W0/x + W1/(x-1) + Wt/(x-t)) Phi is solved at infinity by the
Laurent ansatz Phi(x) = (sum_j C_j x^{-j}) x^{-W_inf} Phi0, whose coefficients
follow from one 2x2 Sylvester equation per order. The solution feeds the
kernel K(l, m) = <J Phi(l), Phi(m)> / (l - m), its factorization through the
six-channel function phi(l) = (V0 Phi/l, V1 Phi/(l-1), Vt Phi/(l-t)), and a
diagonal realization of phi for the linear-system machinery.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, linalg, special

from .errors import DomainError, IntegrationError, ResonantIndexError
from .linsys import DiagonalRealization
from .models import PviParams
from .numkit import parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "J",
    "SIGNATURE",
    "WMatrices",
    "LaurentSeries",
    "build_w",
    "sylvester_solve",
    "sylvester_integral",
    "laurent_series",
    "recurrence_residual",
    "decaying_branch",
    "phi_eval",
    "phi_derivative",
    "ode_residual",
    "growth_slope",
    "schlesinger_sides",
    "schlesinger_residual",
    "stacked_phi",
    "kernel_k",
    "factorized_kernel",
    "kernel_dt_matrix",
    "bounded_solution_plateau",
    "stacked_coefficients",
    "realize",
]

J = np.array([[0.0, -1.0], [1.0, 0.0]])
SIGMA_11 = np.array([1.0, -1.0])
# block order (0, 1, t), each block carrying sigma_{1,1}
SIGNATURE = np.tile(SIGMA_11, 3)
RESONANCE_TOL = 1e-10
EIGEN_GAP = 1e-8


def _w_matrix(theta: float, z: float, u: float) -> np.ndarray:
    return np.array([[z + theta / 2.0, -u * z], [(z + theta) / u, -z - theta / 2.0]])


def _signature_factor(jw: np.ndarray) -> np.ndarray:
    """Real V with V^T diag(1, -1) V = jw for symmetric jw with det <= 0."""
    eigs, vecs = np.linalg.eigh(jw)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    low, high = eigs
    if low > 1e-14 * scale or high < -1e-14 * scale:
        raise DomainError(f"JW is definite (eigenvalues {eigs}); no sigma_(1,1) factorization", tag="factorization")
    pos = math.sqrt(max(high, 0.0)) * vecs[:, 1]
    neg = math.sqrt(max(-low, 0.0)) * vecs[:, 0]
    return np.vstack([pos, neg])


class WMatrices(NamedTuple):
    W0: np.ndarray
    W1: np.ndarray
    Wt: np.ndarray
    W_inf: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    Vt: np.ndarray

    @property
    def residues(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.W0, self.W1, self.Wt

    @property
    def factors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.V0, self.V1, self.Vt


def build_w(p: PviParams) -> WMatrices:
    """
    Residue matrices W_nu, W_inf = -(W0 + W1 + Wt) and the factors V_nu of J W_nu.

    J W_nu is symmetric with det -theta_nu^2/4, so it has signature zero and
    J W_nu = V_nu^T sigma_(1,1) V_nu; theta_nu = 0 leaves a zero row in V_nu.
    """
    w0 = _w_matrix(p.theta0, p.z0, p.u0)
    w1 = _w_matrix(p.theta1, p.z1, p.u1)
    wt = _w_matrix(p.thetat, p.zt, p.ut)
    w_inf = -(w0 + w1 + wt)
    factors = [_signature_factor(J @ w) for w in (w0, w1, wt)]
    return WMatrices(w0, w1, wt, w_inf, *factors)


def _check_resonance(w_inf: np.ndarray, n: int) -> None:
    mu = np.linalg.eigvals(w_inf)
    gaps = np.abs(mu[:, None] - mu[None, :] - n)
    if np.min(gaps) < RESONANCE_TOL:
        raise ResonantIndexError(
            f"W_inf and W_inf + {n} I share an eigenvalue (eigenvalues {mu})",
            n=n,
            context={"eigenvalues": [complex(m) for m in mu]},
        )


def sylvester_solve(w_inf: np.ndarray, n: int, d: np.ndarray) -> np.ndarray:
    """
    Unique C with W_inf C - C (W_inf + n I) = D, via the 4x4 Kronecker system.

    Raises:
        ResonantIndexError: when mu_i - mu_j = n for eigenvalues of W_inf
    """
    w_inf = np.asarray(w_inf)
    d = np.asarray(d)
    _check_resonance(w_inf, n)
    eye = np.eye(2)
    # column-major vec: vec(A X B) = (B^T kron A) vec(X)
    system = np.kron(eye, w_inf) - np.kron(w_inf.T, eye) - n * np.eye(4)
    solution = linalg.solve(system, d.reshape(-1, order="F"))
    return solution.reshape(2, 2, order="F")


def sylvester_integral(w_inf: np.ndarray, n: int, d: np.ndarray) -> np.ndarray:
    """C = -int_0^oo exp(s W_inf) D exp(-s (W_inf + n I)) ds, valid when the integrand decays."""
    w_inf = np.asarray(w_inf, dtype=float)
    d = np.asarray(d, dtype=float)
    shifted = w_inf + n * np.eye(2)

    def integrand(s: float) -> np.ndarray:
        return (linalg.expm(s * w_inf) @ d @ linalg.expm(-s * shifted)).ravel()

    value, err = integrate.quad_vec(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    if not np.all(np.isfinite(value)):
        raise IntegrationError("Sylvester integral diverged", context={"n": n, "error": float(err)})
    return -value.reshape(2, 2)


@dataclass(frozen=True)
class LaurentSeries:
    """
    Coefficients C_0 = I, C_1, ..., C_M of the expansion at infinity.

    Attributes:
        W_inf: Exponent matrix at infinity
        coefficients: Array of shape (M + 1, 2, 2)
        t: Position of the movable singular point
        growth: max ||C_n||^{1/n} over the upper half of the orders
    """

    W_inf: np.ndarray
    coefficients: np.ndarray
    t: float
    growth: float

    @property
    def order(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def C(self) -> List[np.ndarray]:
        return list(self.coefficients[1:])

    @property
    def roots(self) -> np.ndarray:
        """||C_n||^{1/n} for n = 1..M (spectral norm)."""
        norms = np.linalg.norm(self.coefficients[1:], ord=2, axis=(1, 2))
        n = np.arange(1, self.order + 1)
        return norms ** (1.0 / n)

    def truncated(self, order: int) -> "LaurentSeries":
        order = min(int(order), self.order)
        return LaurentSeries(self.W_inf, self.coefficients[: order + 1], self.t, _growth(self.coefficients[: order + 1]))


def _growth(coefficients: np.ndarray) -> float:
    m = coefficients.shape[0] - 1
    if m < 1:
        return 0.0
    norms = np.linalg.norm(coefficients[1:], ord=2, axis=(1, 2))
    roots = norms ** (1.0 / np.arange(1, m + 1))
    return float(np.max(roots[(m - 1) // 2 :]))


def _rhs(w: WMatrices, t: float, partial: np.ndarray, weighted: np.ndarray) -> np.ndarray:
    return w.W1 @ partial + t * w.Wt @ weighted


def laurent_series(p: PviParams, M: int) -> LaurentSeries:
    """
    Forward recurrence W_inf C_n - C_n (W_inf + n I) = W1 sum_{j<n} C_j + t Wt sum_{j<n} t^{n-1-j} C_j.
    """
    if M < 0:
        raise DomainError(f"Laurent order must be >= 0, got {M}")
    w = build_w(p)
    coefficients = np.zeros((M + 1, 2, 2))
    coefficients[0] = np.eye(2)
    partial = np.zeros((2, 2))
    weighted = np.zeros((2, 2))
    for n in range(1, M + 1):
        partial = partial + coefficients[n - 1]
        weighted = p.t * weighted + coefficients[n - 1]
        coefficients[n] = sylvester_solve(w.W_inf, n, _rhs(w, p.t, partial, weighted))
    growth = _growth(coefficients)
    logger.info("Laurent series: M=%d growth=%.4g", M, growth)
    return LaurentSeries(W_inf=w.W_inf, coefficients=coefficients, t=p.t, growth=growth)


def recurrence_residual(p: PviParams, series: LaurentSeries) -> float:
    """Max over n of the scaled residual of the Sylvester recurrence."""
    w = build_w(p)
    worst = 0.0
    partial = np.zeros((2, 2))
    weighted = np.zeros((2, 2))
    c = series.coefficients
    for n in range(1, series.order + 1):
        partial = partial + c[n - 1]
        weighted = p.t * weighted + c[n - 1]
        rhs = _rhs(w, p.t, partial, weighted)
        lhs = w.W_inf @ c[n] - c[n] @ (w.W_inf + n * np.eye(2))
        scale = max(1.0, np.linalg.norm(rhs), n * np.linalg.norm(c[n]))
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / scale))
    return worst


def decaying_branch(series: LaurentSeries) -> Tuple[np.ndarray, complex]:
    """Eigenvector Phi0 of W_inf for the eigenvalue mu of largest real part, so x^{-W_inf} Phi0 = x^{-mu} Phi0."""
    mu, vecs = np.linalg.eig(series.W_inf)
    k = int(np.argmax(mu.real))
    vec = vecs[:, k]
    vec = vec / vec[np.argmax(np.abs(vec))]
    vec = vec / np.linalg.norm(vec)
    if np.all(np.abs(vec.imag) < 1e-14) and abs(mu[k].imag) < 1e-14:
        return vec.real, complex(mu[k].real)
    return vec, complex(mu[k])


def _power(w_inf: np.ndarray, x: complex) -> np.ndarray:
    """x^{-W_inf} on the principal branch."""
    log_x = np.log(complex(x))
    mu, vecs = np.linalg.eig(w_inf)
    if abs(mu[0] - mu[1]) > EIGEN_GAP:
        return vecs @ np.diag(np.exp(-mu * log_x)) @ np.linalg.inv(vecs)
    return linalg.expm(-w_inf * log_x)


def _check_radius(series: LaurentSeries, x: complex) -> None:
    if series.order > 0 and abs(x) <= series.growth:
        raise DomainError(
            f"|x| = {abs(x):.6g} is inside the divergence radius {series.growth:.6g} of the Laurent series",
            tag="divergence-radius",
        )


def _real_if_real(value: np.ndarray, x: complex) -> np.ndarray:
    if np.isrealobj(x) or complex(x).imag == 0.0:
        if np.all(np.abs(np.imag(value)) <= 1e-13 * max(1.0, float(np.max(np.abs(value))))):
            return np.real(value)
    return value


def phi_eval(series: LaurentSeries, x: complex, phi0: Sequence[complex]) -> np.ndarray:
    """Phi(x) = (sum_j C_j x^{-j}) x^{-W_inf} Phi0."""
    _check_radius(series, x)
    y = 1.0 / complex(x)
    acc = np.array(series.coefficients[-1], dtype=complex)
    for c in series.coefficients[-2::-1]:
        acc = acc * y + c
    value = acc @ _power(series.W_inf, x) @ np.asarray(phi0, dtype=complex)
    return _real_if_real(value, x)


def phi_derivative(series: LaurentSeries, x: complex, phi0: Sequence[complex]) -> np.ndarray:
    """Phi'(x) = (Y'(x) - Y(x) W_inf / x) x^{-W_inf} Phi0, summed term by term."""
    _check_radius(series, x)
    x = complex(x)
    y = 1.0 / x
    powers = y ** np.arange(series.order + 1)
    orders = np.arange(series.order + 1)
    big_y = np.tensordot(powers, series.coefficients, axes=1)
    big_y_prime = np.tensordot(-orders * powers * y, series.coefficients, axes=1)
    value = (big_y_prime - big_y @ series.W_inf * y) @ _power(series.W_inf, x) @ np.asarray(phi0, dtype=complex)
    return _real_if_real(value, x)


def _coefficient_matrix(p: PviParams, x: complex) -> np.ndarray:
    w = build_w(p)
    return w.W0 / x + w.W1 / (x - 1.0) + w.Wt / (x - p.t)


def ode_residual(
    p: PviParams,
    series: LaurentSeries,
    x: float,
    phi0: Sequence[complex],
    method: str = "complex-step",
    h: float = 1e-20,
) -> float:
    """
    ||Phi'(x) - A(x) Phi(x)|| at real x.

    The complex-step derivative Im Phi(x + ih) / h needs a real solution on
    the real axis; method="analytic" uses phi_derivative instead.
    """
    value = phi_eval(series, x, phi0)
    if method == "complex-step":
        derivative = np.imag(np.asarray(phi_eval(series, complex(x, h), phi0), dtype=complex)) / h
    elif method == "analytic":
        derivative = phi_derivative(series, x, phi0)
    else:
        raise DomainError(f"unknown derivative method {method!r}")
    return float(np.linalg.norm(derivative - _coefficient_matrix(p, x) @ value))


def growth_slope(series: LaurentSeries, phi0: Sequence[complex], xs: Sequence[float]) -> float:
    """Least-squares slope of log ||Phi(x)|| against log x."""
    xs = np.asarray(xs, dtype=float)
    norms = np.array([np.linalg.norm(phi_eval(series, x, phi0)) for x in xs])
    return float(np.polyfit(np.log(xs), np.log(norms), 1)[0])


def schlesinger_sides(p: PviParams, lam: complex) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both sides of the zero-curvature identity at lam.

    The t-flow is dW0 = [Wt, W0]/t, dW1 = [Wt, W1]/(t-1), dWt = -dW0 - dW1.
    """
    if lam in (0.0, 1.0, p.t):
        raise DomainError(f"lambda = {lam} is a singular point")
    w = build_w(p)
    t = p.t

    def bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b - b @ a

    d0 = bracket(w.Wt, w.W0) / t
    d1 = bracket(w.Wt, w.W1) / (t - 1.0)
    dt = -d0 - d1
    lhs = d0 / lam + d1 / (lam - 1.0) + dt / (lam - t)
    rhs = bracket(w.W0, w.Wt) / (lam * (lam - t)) + bracket(w.W1, w.Wt) / ((lam - 1.0) * (lam - t))
    return lhs, rhs


def schlesinger_residual(p: PviParams, lams: Sequence[complex]) -> float:
    """Max over samples of ||lhs - rhs|| / max(1, ||rhs||)."""
    worst = 0.0
    for lam in lams:
        lhs, rhs = schlesinger_sides(p, lam)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / max(1.0, np.linalg.norm(rhs))))
    return worst


def stacked_phi(p: PviParams, series: LaurentSeries, phi0: Sequence[complex], lam: float) -> np.ndarray:
    """phi(lam) = (V0 Phi/lam, V1 Phi/(lam - 1), Vt Phi/(lam - t)) in R^6."""
    w = build_w(p)
    value = phi_eval(series, lam, phi0)
    return np.concatenate([w.V0 @ value / lam, w.V1 @ value / (lam - 1.0), w.Vt @ value / (lam - p.t)])


def kernel_k(p: PviParams, series: LaurentSeries, phi0: Sequence[complex], lam: float, mu: float) -> float:
    """
    K(lam, mu) = <J Phi(lam), Phi(mu)> / (lam - mu).

    On the diagonal the limit <J Phi'(lam), Phi(lam)> is taken with a complex-step derivative.
    """
    left = phi_eval(series, lam, phi0)
    if lam == mu:
        derivative = np.imag(np.asarray(phi_eval(series, complex(lam, 1e-20), phi0), dtype=complex)) / 1e-20
        return float(np.real((J @ derivative) @ left))
    right = phi_eval(series, mu, phi0)
    return float(np.real((J @ left) @ right) / (lam - mu))


def factorized_kernel(
    p: PviParams,
    series: LaurentSeries,
    phi0: Sequence[complex],
    lam: float,
    mu: float,
) -> float:
    """int_0^oo <sigma phi(lam + s), phi(mu + s)> ds by adaptive quadrature."""

    def integrand(s: float) -> float:
        left = stacked_phi(p, series, phi0, lam + s)
        right = stacked_phi(p, series, phi0, mu + s)
        return float(np.real(np.sum(SIGNATURE * left * right)))

    value, err = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
    if not math.isfinite(value):
        raise IntegrationError("factorized kernel integral diverged", context={"lam": lam, "mu": mu})
    logger.debug("factorized kernel at (%g, %g): %.12g +- %.2e", lam, mu, value, err)
    return value


def kernel_dt_matrix(
    p: PviParams,
    series: LaurentSeries,
    phi0: Sequence[complex],
    grid: Sequence[float],
) -> np.ndarray:
    """Samples of dK/dt = <J Wt Phi(l), Phi(m)> / ((l - t)(m - t)) on grid x grid."""
    w = build_w(p)
    grid = np.asarray(grid, dtype=float)
    values = np.array([phi_eval(series, lam, phi0) for lam in grid])
    jwt = J @ w.Wt
    form = np.real(values @ jwt.T @ values.T)
    shift = grid - p.t
    return form / (shift[:, None] * shift[None, :])


def bounded_solution_plateau(
    series: LaurentSeries,
    phi0: Sequence[complex],
    start: float,
    windows: int = 6,
) -> List[float]:
    """
    Partial integrals of lam^{-1} ||Phi(lam)||^2 over [start, 2^k start], k = 1..windows.

    A bounded solution in L^2(lam^{-1} d lam) gives an increasing, plateauing sequence.
    """

    def integrand(lam: float) -> float:
        return float(np.linalg.norm(phi_eval(series, lam, phi0)) ** 2 / lam)

    partial = 0.0
    values = []
    lower = float(start)
    for _ in range(windows):
        upper = 2.0 * lower
        piece, _ = integrate.quad(integrand, lower, upper, epsabs=1e-13, epsrel=1e-11)
        partial += piece
        values.append(partial)
        lower = upper
    return values


def stacked_coefficients(
    p: PviParams,
    series: LaurentSeries,
    phi0: Sequence[complex],
    mu: complex,
    n_terms: Optional[int] = None,
) -> np.ndarray:
    """
    F_n, n = 1..n_terms, with phi(lam) = sum_n F_n lam^{-n-mu} for an eigenvector Phi0.

    F_n stacks V_nu a_n^(nu) where a_1^(nu) = Phi0 and a_{n+1}^(nu) = nu a_n^(nu) + C_n Phi0.
    """
    n_terms = series.order + 1 if n_terms is None else int(n_terms)
    if n_terms > series.order + 1:
        raise DomainError(f"need C_n up to n = {n_terms - 1}, series has order {series.order}")
    w = build_w(p)
    phi0 = np.asarray(phi0)
    nus = (0.0, 1.0, p.t)
    terms = np.zeros((n_terms, 6), dtype=np.result_type(phi0, float))
    accum = [phi0.copy() for _ in nus]
    for n in range(1, n_terms + 1):
        terms[n - 1] = np.concatenate([v @ a for v, a in zip(w.factors, accum)])
        if n < n_terms:
            step = series.coefficients[n] @ phi0
            accum = [nu * a + step for nu, a in zip(nus, accum)]
    return terms


def realize(
    p: PviParams,
    series: LaurentSeries,
    phi0: Sequence[complex],
    mu: float,
    x0: float = 6.0,
    nodes: int = 32,
    radius: Optional[float] = None,
    threads: Optional[int] = None,
) -> DiagonalRealization:
    """
    Diagonal realization of x -> phi(x0 + x) with six output channels.

    y^{-n-mu} = Gamma(n + mu)^{-1} int_0^oo s^{n+mu-1} e^{-ys} ds turns the
    stacked series into a Laplace integral; with s = sigma / kappa and
    kappa = (x0 - R)/2 it is discretized by generalized Gauss-Laguerre
    quadrature of weight sigma^mu e^{-sigma}. The nodes give
    lambda_k = sigma_k / kappa and output columns
    xi_k = w_k kappa^{-mu-1} e^{sigma_k (1 - x0/kappa)} sum_n F_n (sigma_k/kappa)^{n-1} / Gamma(n + mu).

    Args:
        p: Parameters
        series: Laurent series; its order fixes the number of F_n
        phi0: Eigenvector of W_inf for mu
        mu: Real eigenvalue, mu > -1
        x0: Base point, x0 > R
        nodes: Gauss-Laguerre nodes
        radius: Growth radius R, defaults to max(1, |t|)

    Returns:
        DiagonalRealization with input dimension 1 and signature (+,-,+,-,+,-)
    """
    mu = float(np.real(mu))
    if not mu > -1.0:
        raise DomainError(f"Laguerre weight needs mu > -1, got {mu}")
    radius = max(1.0, abs(p.t)) if radius is None else float(radius)
    if not x0 > radius:
        raise DomainError(f"base point x0 = {x0} must exceed the growth radius {radius}")
    kappa = (x0 - radius) / 2.0
    sigma, weights = special.roots_genlaguerre(int(nodes), mu)
    terms = np.real(stacked_coefficients(p, series, phi0, mu))
    n = np.arange(1, terms.shape[0] + 1, dtype=float)
    log_gamma = special.gammaln(n + mu)

    def column(k: int) -> np.ndarray:
        s = sigma[k] / kappa
        log_scale = (n - 1.0) * math.log(s) - log_gamma + sigma[k] * (1.0 - x0 / kappa) - (mu + 1.0) * math.log(kappa)
        return weights[k] * (np.exp(log_scale) @ terms)

    outputs = np.array(parallel_map(column, range(sigma.size), threads))
    logger.info("PVI realization: nodes=%d terms=%d kappa=%.4g", sigma.size, terms.shape[0], kappa)
    return DiagonalRealization(
        lambdas=sigma / kappa,
        b=np.ones((sigma.size, 1)),
        c=outputs.T,
        signature=SIGNATURE,
    )
