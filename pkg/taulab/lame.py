"""
Elliptic functions and the Lame symbol Psi(x; alpha).

Jacobi functions come from scipy's real-argument routines and the addition
theorem; the Weierstrass sigma and zeta functions, and Psi itself, go through
the nome series of theta_1. The half periods are omega_1 = K and
omega_3 = iK', with e1 - e3 = 1 so that P(z) = e3 + 1/sn(z|k^2)^2.

Psi is expanded on the line x + 2t + offset (offset = iK' by default, away
from the real lattice points) into a bilateral exponential symbol with
lambda_m = (beta + 2 pi i m) / (2K), whose tau function is then a finite
determinant.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, NonDecayingSymbolError, PoleError
from .expsymbol import ExpSymbol, gram_bounds, tau_det, to_realization
from .linsys import TauCurve, resolvent_trace
from .models import EllipticParams
from .numkit import QuadGrid, composite_gauss_legendre, half_line_grid, hankel_matrix, ordered_sum, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "LameSymbol",
    "elliptic_K",
    "jacobi_elliptic",
    "jacobi_sn",
    "weierstrass_p",
    "jacobi_theta1",
    "quasi_periods",
    "weierstrass_zeta_sigma",
    "sigma_lattice_product",
    "lame_psi",
    "lame_psi_reference",
    "lame_ode_residual",
    "beta_exponent",
    "bilateral_lambdas",
    "exp_expansion",
    "tau_lame",
    "auto_truncation",
    "oracle_grid",
    "hankel_oracle",
    "lattice_sum",
    "lattice_sum_closed",
    "bilateral_gram_condition",
]

POLE_TOL = 1e-14

Number = Union[complex, np.ndarray]


def _as_output(values: np.ndarray, scalar: bool) -> Number:
    return complex(values) if scalar else values


def elliptic_K(k: float) -> Tuple[float, float]:
    """Complete elliptic integrals K(k) and K'(k) = K(sqrt(1 - k^2))."""
    if not 0.0 < k < 1.0:
        raise DomainError(f"modulus must lie in (0, 1), got {k}", tag="elliptic-modulus")
    m = k * k
    return float(special.ellipk(m)), float(special.ellipkm1(m))


def jacobi_elliptic(z, m: float) -> Tuple[Number, Number, Number]:
    """
    sn, cn, dn at complex z and parameter m = k^2 in [0, 1).

    Uses the imaginary-argument addition theorem on top of scipy.special.ellipj.
    """
    if not 0.0 <= m < 1.0:
        raise DomainError(f"parameter m = k^2 must lie in [0, 1), got {m}", tag="elliptic-modulus")
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    s, c, d, _ = special.ellipj(z.real, m)
    s1, c1, d1, _ = special.ellipj(z.imag, 1.0 - m)
    den = c1**2 + m * s**2 * s1**2
    if np.any(np.abs(den) <= POLE_TOL):
        raise PoleError("Jacobi functions have a pole here", context={"z": complex(np.ravel(z)[np.argmin(np.abs(den))])})
    sn = (s * d1 + 1j * c * d * s1 * c1) / den
    cn = (c * c1 - 1j * s * d * s1 * d1) / den
    dn = (d * c1 * d1 - 1j * m * s * c * s1) / den
    return _as_output(sn, scalar), _as_output(cn, scalar), _as_output(dn, scalar)


def jacobi_sn(z, k: float) -> Number:
    """sn(z | k^2)."""
    if not 0.0 <= k < 1.0:
        raise DomainError(f"modulus must lie in [0, 1), got {k}", tag="elliptic-modulus")
    sn, _, _ = jacobi_elliptic(z, k * k)
    return sn


def weierstrass_p(z, p: EllipticParams) -> Tuple[Number, Number]:
    """
    P(z) and P'(z) on the lattice 2K Z + 2iK' Z.

    P = e3 + 1/sn^2 and P' = -2 cn dn / sn^3, written over the common
    denominator of the addition theorem so that the poles of sn are regular.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    m = p.k2
    s, c, d, _ = special.ellipj(z.real, m)
    s1, c1, d1, _ = special.ellipj(z.imag, 1.0 - m)
    den = c1**2 + m * s**2 * s1**2
    num_s = s * d1 + 1j * c * d * s1 * c1
    num_c = c * c1 - 1j * s * d * s1 * d1
    num_d = d * c1 * d1 - 1j * m * s * c * s1
    # at the poles of sn (z = iK' mod lattice) P = e3 and P' = 0
    sn_pole = np.abs(den) <= POLE_TOL
    lattice = (np.abs(num_s) <= POLE_TOL) & ~sn_pole
    if np.any(lattice):
        raise PoleError("P has a double pole at lattice points", context={"z": complex(np.ravel(z)[np.argmax(np.ravel(lattice))])})
    safe = np.where(sn_pole, 1.0, num_s)
    wp = np.where(sn_pole, p.e3, p.e3 + (den / safe) ** 2)
    wp_prime = np.where(sn_pole, 0.0, -2.0 * num_c * num_d * den / safe**3)
    return _as_output(wp, scalar), _as_output(wp_prime, scalar)


def _theta_terms(a: float, y: float, derivative: int) -> int:
    # terms beyond u = n + 1/2 with a u^2 - 2 y u > 40 are below double precision
    u = (y + math.sqrt(y * y + 40.0 * a)) / a
    return int(math.ceil(u)) + 2 + derivative


def jacobi_theta1(v, q: float, derivative: int = 0) -> Number:
    """
    theta_1(v, q) = 2 sum_n (-1)^n q^{(n + 1/2)^2} sin((2n + 1) v) and its derivatives in v.

    Args:
        v: Complex argument (scalar or array)
        q: Nome in (0, 1)
        derivative: Order 0, 1, 2 or 3

    Returns:
        Value with the shape of v
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"nome must lie in (0, 1), got {q}")
    if derivative not in (0, 1, 2, 3):
        raise DomainError(f"theta derivative order must be 0..3, got {derivative}")
    scalar = np.ndim(v) == 0
    v = np.asarray(v, dtype=complex)
    a = -math.log(q)
    y = float(np.max(np.abs(v.imag), initial=0.0))
    n = np.arange(_theta_terms(a, y, derivative), dtype=float)
    freq = 2.0 * n + 1.0
    coeff = 2.0 * np.where(n % 2 == 0, 1.0, -1.0) * np.exp(-a * (n + 0.5) ** 2) * freq**derivative
    values = np.sin(np.multiply.outer(v, freq) + derivative * math.pi / 2.0) @ coeff
    return _as_output(values, scalar)


def _nome(p: EllipticParams) -> float:
    return math.exp(-math.pi * p.Kp / p.K)


def _eta1(p: EllipticParams) -> float:
    q = _nome(p)
    d1 = jacobi_theta1(0.0, q, 1).real
    d3 = jacobi_theta1(0.0, q, 3).real
    return -(math.pi**2) * d3 / (12.0 * p.K * d1)


def weierstrass_zeta_sigma(z, p: EllipticParams) -> Tuple[Number, Number]:
    """
    Weierstrass zeta and sigma.

    sigma(z) = (2K/pi) exp(eta1 z^2 / (2K)) theta_1(v) / theta_1'(0) and
    zeta(z) = eta1 z / K + (pi / 2K) theta_1'(v) / theta_1(v), v = pi z / (2K).
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    q = _nome(p)
    scale = math.pi / (2.0 * p.K)
    v = scale * z
    th = jacobi_theta1(v, q)
    th_prime0 = jacobi_theta1(0.0, q, 1).real
    eta1 = _eta1(p)
    if np.any(np.abs(th) <= POLE_TOL * th_prime0):
        raise PoleError("zeta has a pole at lattice points", context={"z": complex(np.ravel(z)[np.argmin(np.abs(th))])})
    zeta = eta1 * z / p.K + scale * jacobi_theta1(v, q, 1) / th
    sigma = np.exp(eta1 * z**2 / (2.0 * p.K)) * th / (scale * th_prime0)
    return _as_output(zeta, scalar), _as_output(sigma, scalar)


def quasi_periods(p: EllipticParams) -> Tuple[complex, complex]:
    """(eta1, eta3) = (zeta(K), zeta(iK'))."""
    eta1, _ = weierstrass_zeta_sigma(p.K, p)
    eta3, _ = weierstrass_zeta_sigma(1j * p.Kp, p)
    return eta1, eta3


def sigma_lattice_product(z: complex, p: EllipticParams, radius: Optional[float] = None) -> complex:
    """
    z prod_{0 < |w| <= radius} (1 - z/w) exp(z/w + z^2 / (2 w^2)).

    The disk truncation leaves an error of order |z|^4 / radius^2.
    """
    radius = 200.0 * max(p.K, p.Kp) if radius is None else float(radius)
    m_max = int(radius // (2.0 * p.K)) + 1
    n_max = int(radius // (2.0 * p.Kp)) + 1
    mm, nn = np.meshgrid(np.arange(-m_max, m_max + 1), np.arange(-n_max, n_max + 1), indexing="ij")
    omega = (2.0 * p.K * mm + 2j * p.Kp * nn).ravel()
    omega = omega[(omega != 0) & (np.abs(omega) <= radius)]
    ratio = complex(z) / omega
    if np.any(np.abs(1.0 - ratio) <= POLE_TOL):
        return 0j
    log_terms = np.log1p(-ratio) + ratio + 0.5 * ratio**2
    return complex(z) * complex(np.exp(ordered_sum(log_terms)))


@dataclass(frozen=True)
class LameSymbol:
    """
    Lame symbol x -> Psi(x + 2t + offset; alpha).

    Attributes:
        params: Elliptic lattice data
        alpha: Spectral parameter, off the lattice
        t: Real shift
        M: Fourier truncation, indices |m| <= M
        offset: Complex shift of the evaluation line, defaults to iK'
        beta: Decay exponent, computed; Re beta > 0 is required
    """

    params: EllipticParams
    alpha: complex
    t: float = 0.0
    M: int = 32
    offset: Optional[complex] = None
    beta: complex = field(init=False)

    def __post_init__(self):
        if self.M < 1:
            raise DomainError(f"Fourier truncation must be >= 1, got {self.M}")
        if self.offset is None:
            object.__setattr__(self, "offset", 1j * self.params.Kp)
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", beta_exponent(self.params, self.alpha))

    @property
    def period(self) -> float:
        return 2.0 * self.params.K

    @property
    def decay_rate(self) -> float:
        """Envelope rate Re beta / (2K) of |Psi| along the line."""
        return self.beta.real / self.period

    def symbol(self, x) -> Number:
        """Psi(x + 2t + offset; alpha)."""
        return lame_psi(np.asarray(x, dtype=float) + 2.0 * self.t + self.offset, self)


def _theta_log_derivative(alpha: complex, p: EllipticParams) -> complex:
    q = _nome(p)
    v = math.pi * alpha / (2.0 * p.K)
    th = jacobi_theta1(v, q)
    if abs(th) <= POLE_TOL:
        raise PoleError(f"alpha = {alpha} is a lattice point", context={"alpha": alpha})
    return jacobi_theta1(v, q, 1) / th


def lame_psi(x, sym: LameSymbol) -> Number:
    """
    Psi(x; alpha) = -sigma(x - alpha) exp(zeta(alpha) x) / (sigma(alpha) sigma(x)).

    In theta form the Gaussian factors cancel:
    Psi = -(pi/2K) theta_1'(0) theta_1(v_x - v_a) / (theta_1(v_a) theta_1(v_x)) exp((pi/2K) (theta_1'/theta_1)(v_a) x).
    """
    p = sym.params
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=complex)
    q = _nome(p)
    scale = math.pi / (2.0 * p.K)
    v_x = scale * x
    v_a = scale * sym.alpha
    th_prime0 = jacobi_theta1(0.0, q, 1).real
    th_x = jacobi_theta1(v_x, q)
    if np.any(np.abs(th_x) <= POLE_TOL * th_prime0):
        raise PoleError("Psi has a pole at lattice points", context={"x": complex(np.ravel(x)[np.argmin(np.abs(th_x))])})
    th_a = jacobi_theta1(v_a, q)
    log_deriv = _theta_log_derivative(sym.alpha, p)
    values = -scale * th_prime0 * jacobi_theta1(v_x - v_a, q) / (th_a * th_x) * np.exp(scale * log_deriv * x)
    return _as_output(values, scalar)


def lame_psi_reference(x: complex, sym: LameSymbol, dps: int = 30) -> complex:
    """Scalar Psi through mpmath.jtheta at extended precision."""
    p = sym.params
    with mpmath.workdps(dps):
        K = mpmath.mpf(p.K)
        q = mpmath.exp(-mpmath.pi * mpmath.mpf(p.Kp) / K)
        scale = mpmath.pi / (2 * K)
        v_x = scale * mpmath.mpc(x)
        v_a = scale * mpmath.mpc(sym.alpha)
        th_a = mpmath.jtheta(1, v_a, q)
        log_deriv = mpmath.jtheta(1, v_a, q, 1) / th_a
        value = (
            -scale
            * mpmath.jtheta(1, 0, q, 1)
            * mpmath.jtheta(1, v_x - v_a, q)
            / (th_a * mpmath.jtheta(1, v_x, q))
            * mpmath.exp(scale * log_deriv * mpmath.mpc(x))
        )
        return complex(value)


def lame_ode_residual(x: complex, sym: LameSymbol, h: float = 1e-3) -> float:
    """|Psi'' - (2 P(x) + P(alpha)) Psi| with a five-point second difference."""
    stencil = np.asarray(x, dtype=complex) + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    f = lame_psi(stencil, sym)
    second = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
    wp_x, _ = weierstrass_p(x, sym.params)
    wp_a, _ = weierstrass_p(sym.alpha, sym.params)
    return float(abs(second - (2.0 * wp_x + wp_a) * f[2]))


def beta_exponent(params: EllipticParams, alpha: complex, require_decay: bool = True) -> complex:
    """
    beta = -2K zeta(alpha) + alpha (zeta(alpha + 2K) - zeta(alpha)).

    Psi(x + 2K) = exp(-beta) Psi(x), so the symbol decays along the line iff Re beta > 0.
    """
    alpha = complex(alpha)
    _theta_log_derivative(alpha, params)
    zeta_a, _ = weierstrass_zeta_sigma(alpha, params)
    zeta_shift, _ = weierstrass_zeta_sigma(alpha + 2.0 * params.K, params)
    beta = -2.0 * params.K * zeta_a + alpha * (zeta_shift - zeta_a)
    if require_decay and beta.real <= 0.0:
        raise NonDecayingSymbolError(
            f"Re beta = {beta.real:.6g} <= 0 for alpha = {alpha}; Psi does not decay",
            context={"alpha": alpha, "beta": beta},
        )
    return complex(beta)


def bilateral_lambdas(beta: complex, K: float, M: int) -> np.ndarray:
    """lambda_m = (beta + 2 pi i m) / (2K) for m = -M, ..., M."""
    m = np.arange(-int(M), int(M) + 1)
    return (beta + 2j * math.pi * m) / (2.0 * K)


def exp_expansion(sym: LameSymbol, panels: Optional[int] = None) -> ExpSymbol:
    """
    Bilateral exponential expansion of x -> Psi(x + 2t + offset; alpha).

    xi_m = h(-lambda_m) / (2K) with h(s) = int_0^{2K} exp(-s u) Psi(u + 2t + offset) du,
    all m sharing one Gauss-Legendre panelization of [0, 2K].
    """
    period = sym.period
    panels = max(4, math.ceil(sym.M / 8)) if panels is None else int(panels)
    grid = composite_gauss_legendre(0.0, period, panels)
    samples = sym.symbol(grid.nodes)
    lambdas = bilateral_lambdas(sym.beta, sym.params.K, sym.M)
    h = np.exp(np.multiply.outer(lambdas, grid.nodes)) @ (grid.weights * samples)
    logger.info("Lame expansion: M=%d panels=%d nodes=%d", sym.M, panels, len(grid))
    return ExpSymbol(lambdas, (h / period).reshape(-1, 1))


def tau_lame(sym: LameSymbol, ts: Sequence[float], threads: Optional[int] = None) -> TauCurve:
    """
    tau(t) = det(I - R_t) over the bilateral expansion, with sigma = trace T_{-1}(t, t).

    Shifts add: the curve is tau for the symbol Psi(x + 2 sym.t + 2 s + offset) at s in ts.
    """
    expansion = exp_expansion(sym)
    realization = to_realization(expansion)
    return TauCurve.from_function(
        ts,
        lambda s: tau_det(expansion, s),
        lambda s: resolvent_trace(realization, s),
        threads=threads,
    )


def auto_truncation(
    sym: LameSymbol,
    ts: Sequence[float],
    tol: float = 1e-9,
    max_doublings: int = 4,
    threads: Optional[int] = None,
) -> Tuple[TauCurve, int]:
    """Double M until the tau curve changes by less than tol."""
    current = sym
    curve = tau_lame(current, ts, threads)
    for _ in range(max_doublings):
        finer = replace(current, M=2 * current.M)
        finer_curve = tau_lame(finer, ts, threads)
        change = float(np.max(np.abs(finer_curve.taus - curve.taus), initial=0.0))
        logger.info("Lame truncation: M=%d -> %d change=%.3e", current.M, finer.M, change)
        current, curve = finer, finer_curve
        if change < tol:
            return curve, current.M
    raise ConvergenceError(
        f"Lame tau did not plateau below {tol:g} up to M={current.M}",
        context={"M": current.M},
    )


def oracle_grid(
    sym: LameSymbol,
    *,
    nodes: Optional[int] = None,
    tol: Optional[float] = None,
    panels: Optional[int] = None,
) -> QuadGrid:
    """Half-line grid of hankel_oracle, one panel per period unless panels is given."""
    samples = composite_gauss_legendre(0.0, sym.period, 4, 16)
    scale = float(np.max(np.abs(sym.symbol(samples.nodes))))
    return half_line_grid(0.0, sym.decay_rate, tol=tol, scale=scale, panel_length=sym.period, panels=panels, nodes=nodes)


def hankel_oracle(
    sym: LameSymbol,
    ts: Sequence[float],
    *,
    nodes: Optional[int] = None,
    tol: Optional[float] = None,
    panels: Optional[int] = None,
    threads: Optional[int] = None,
) -> np.ndarray:
    """Nystrom det(I - H_t) for the Hankel kernel Psi(x + y + 2t + 2 sym.t + offset)."""
    grid = oracle_grid(sym, nodes=nodes, tol=tol, panels=panels)

    def det_at(s: float) -> complex:
        matrix = hankel_matrix(lambda u: sym.symbol(u + 2.0 * s), grid)
        return matrix.det(-1.0)

    return np.asarray(parallel_map(det_at, ts, threads), dtype=complex)


def lattice_sum(beta: complex, K: float, kmax: int = 1000, j: int = 0) -> float:
    """
    sum_k 1 / |lambda_j + lambda_k|^2 over the bilateral progression.

    The window |k| <= kmax is summed directly; the two tails use the
    trigamma asymptotics of sum 1 / (pi (n + c))^2.
    """
    k = np.arange(-int(kmax), int(kmax) + 1)
    a, b = beta.real, beta.imag
    n = j + k
    direct = ordered_sum(K**2 / (a**2 + (b + math.pi * n) ** 2))
    shift = b / math.pi
    upper = special.polygamma(1, n[-1] + 1 + shift)
    lower = special.polygamma(1, -n[0] + 1 - shift)
    return float(direct + K**2 * (upper + lower) / math.pi**2)


def lattice_sum_closed(beta: complex, K: float) -> float:
    """K^2 Re coth(beta) / Re beta."""
    return float(K**2 * (1.0 / np.tanh(beta)).real / beta.real)


def bilateral_gram_condition(beta: complex, K: float, M: int) -> float:
    """Condition number of the Gram matrix of exp(-lambda_m x), |m| <= M."""
    return gram_bounds(bilateral_lambdas(beta, K, M)).condition
