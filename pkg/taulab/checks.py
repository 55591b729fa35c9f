"""
Invariant and oracle checks, one suite per numeric module.

A check measures one error against one gate and never raises for a failed
comparison; exceptions from the numerics are turned into failed results by
the runner.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from . import cauchydet, expsymbol, hardedge, hypergeom, lame, linsys, numkit, pvi
from .models import BesselParams, EllipticParams, HgParams, PviParams

logger = logging.getLogger(__name__)

SUITE_ORDER = ("numkit", "linsys", "expsymbol", "hardedge", "lame", "cauchydet", "pvi", "hypergeom")


class Measurement(NamedTuple):
    """Measured error against a gate; `passed` overrides the comparison for report-only checks."""

    error: float
    tolerance: float
    detail: str = ""
    data: Optional[Dict[str, Any]] = None
    passed: Optional[bool] = None


@dataclass
class CheckContext:
    seed: int = 0
    tol: float = 0.0
    threads: Optional[int] = None
    cache: Dict[str, Any] = field(default_factory=dict)

    def gate(self, tolerance: float) -> float:
        """--tol only ever loosens a gate."""
        return max(tolerance, self.tol)

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def cached(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self.cache:
            self.cache[key] = build()
        return self.cache[key]


CheckFn = Callable[[CheckContext], Measurement]
SUITES: Dict[str, List[Tuple[str, CheckFn]]] = {name: [] for name in SUITE_ORDER}


def check(suite: str, name: str) -> Callable[[CheckFn], CheckFn]:
    """Register a check under a suite, keeping declaration order."""

    def register(fn: CheckFn) -> CheckFn:
        SUITES[suite].append((name, fn))
        return fn

    return register


def random_symbol(rng: np.random.Generator, size: int) -> expsymbol.ExpSymbol:
    """
    Real exponents in [0.5, 3] with gaps >= 1e-2.

    Coefficients are scaled so that sum |xi| < min lambda, which keeps the Hankel
    norm below 1 and tau positive.
    """
    while True:
        lambdas = np.sort(rng.uniform(0.5, 3.0, size))
        if size < 2 or np.min(np.diff(lambdas)) >= 1e-2:
            break
    xis = rng.uniform(-1.0, 1.0, size)
    xis *= 0.9 * lambdas[0] / np.sum(np.abs(xis))
    return expsymbol.ExpSymbol(lambdas, xis.reshape(-1, 1))


def hankel_grid(sym: expsymbol.ExpSymbol, panels: Optional[int] = None) -> numkit.QuadGrid:
    rate = float(np.min(sym.lambdas.real))
    scale = float(np.sum(np.abs(sym.xis)))
    return numkit.half_line_grid(0.0, rate, scale=scale, panels=panels, nodes=16)


def hankel_tau(sym: expsymbol.ExpSymbol, t: float, panels: Optional[int] = None) -> float:
    """det(I - Gamma) for the Hankel kernel phi(x + y + 2t) on a Nystrom grid."""
    grid = hankel_grid(sym, panels)
    return numkit.hankel_matrix(lambda s: sym(s + 2.0 * t).real, grid).det(-1.0).real


def example_pvi() -> PviParams:
    return PviParams.triangular(0.3, 0.4, 0.5, -0.6, -0.2, -0.15, 1.0, 0.5, 2.0)


def example_hypergeometric() -> HgParams:
    return HgParams(a=math.sqrt(2.0), b=-math.sqrt(2.0), c=0.5)


# numkit


@check("numkit", "gauss-legendre-exactness")
def _gl_exactness(ctx: CheckContext) -> Measurement:
    grid = numkit.gauss_legendre(5, 0.0, 1.0)
    error = abs(grid.integrate(grid.nodes**9) - 0.1)
    return Measurement(error, ctx.gate(1e-14), "int_0^1 x^9 dx with 5 nodes")


@check("numkit", "rank-one-fredholm")
def _rank_one_fredholm(ctx: CheckContext) -> Measurement:
    value = numkit.fredholm_det(lambda x, y: np.exp(-x - y), (0.0, math.inf), decay_rate=1.0)
    return Measurement(abs(value - 0.5), ctx.gate(1e-12), "det(I - e^{-x-y}) on (0, oo) = 1/2")


@check("numkit", "grid-doubling-plateau")
def _plateau(ctx: CheckContext) -> Measurement:
    def builder(panels: int) -> complex:
        grid = numkit.composite_gauss_legendre(0.0, 20.0, panels, 8)
        return numkit.kernel_matrix(lambda x, y: np.exp(-(x + y)) / (1.0 + x + y), grid).det(-1.0)

    value, panels, history = numkit.det_plateau(builder, 2, tol=1e-12, max_doublings=6)
    change = abs(history[-1] - history[-2])
    return Measurement(change, ctx.gate(1e-12), f"plateau at {panels} panels", {"value": float(value.real)})


# linsys


@check("linsys", "rank-one-analytics")
def _rank_one(ctx: CheckContext) -> Measurement:
    sys = linsys.DiagonalRealization.scalar([1.0], [1.0])
    ts = np.linspace(0.0, 3.0, 31)
    err_r = max(abs(expsymbol.tau_det(expsymbol.ExpSymbol([1.0], [1.0]), t) - (1.0 - math.exp(-2.0 * t) / 2.0)) for t in ts)
    err_g = max(abs(linsys.tau_from_gramians(sys, t) - (1.0 - math.exp(-4.0 * t) / 4.0)) for t in ts)
    return Measurement(max(err_r, err_g), ctx.gate(1e-12), "tau = 1 - e^{-2t}/2 and tau_Gamma^2 = 1 - e^{-4t}/4")


@check("linsys", "resolvent-route")
def _resolvent_route(ctx: CheckContext) -> Measurement:
    sym = expsymbol.ExpSymbol([1.0, 2.5], [0.7, -0.4])
    sys = expsymbol.to_realization(sym)
    error = max(abs(linsys.tau_from_resolvent(sys, t) - expsymbol.tau_det(sym, t)) for t in (0.0, 0.5, 1.0))
    return Measurement(error, ctx.gate(1e-10), "exp(-int trace T_{-1}) against det(I - R_t)")


@check("linsys", "gelfand-levitan-diagonal")
def _gl_diagonal(ctx: CheckContext) -> Measurement:
    rng = ctx.rng(1)
    worst = 0.0
    for _ in range(10):
        sym = random_symbol(rng, int(rng.integers(1, 7)))
        sys = expsymbol.to_realization(sym)
        for x in (0.5, 1.0):
            trace = linsys.resolvent_trace(sys, x)
            fd = numkit.log_derivative(lambda s: expsymbol.tau_det(sym, s), x, h=1e-4)
            worst = max(worst, abs(trace - fd))
    return Measurement(worst, ctx.gate(1e-5), "T_{-1}(x, x) against centered log-derivative, h = 1e-4")


@check("linsys", "gelfand-levitan-equation")
def _gl_equation(ctx: CheckContext) -> Measurement:
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0], [1.0, 0.5])
    error = linsys.gl_residual(sys, 0.3, 0.7)
    return Measurement(error, ctx.gate(1e-10), "block equation residual at (0.3, 0.7)")


@check("linsys", "integrable-inverse")
def _integrable_inverse(ctx: CheckContext) -> Measurement:
    sys = linsys.DiagonalRealization.scalar([1.0, 2.0, 3.5], [1.0, -0.5, 0.25])
    _, residual = linsys.integrable_inverse(sys, 0.8, 0.2)
    kernel_gap = float(np.max(np.abs(linsys.rx_squared_matrix(sys, 0.2) - np.linalg.matrix_power(linsys.rx_matrix(sys, 0.2), 2))))
    return Measurement(max(residual, kernel_gap), ctx.gate(1e-12), "(I + L)(I - lam^2 R^2) = I and integrable R^2")


# expsymbol


@check("expsymbol", "determinant-identity")
def _determinant_identity(ctx: CheckContext) -> Measurement:
    rng = ctx.rng(2)
    symbols = [random_symbol(rng, int(rng.integers(1, 7))) for _ in range(25)]

    def worst_gap(sym: expsymbol.ExpSymbol) -> float:
        return max(abs(expsymbol.tau_det(sym, t).real - hankel_tau(sym, t)) for t in (0.0, 0.5, 1.0))

    gaps = numkit.parallel_map(worst_gap, symbols, ctx.threads)
    return Measurement(max(gaps), ctx.gate(1e-8), "det(I - R_t) against Nystrom Hankel determinant, 25 symbols")


@check("expsymbol", "cauchy-binet-self-adjoint")
def _cauchy_binet_example(ctx: CheckContext) -> Measurement:
    sym = expsymbol.ExpSymbol([1.0, 2.0], [1.0, 1.0])
    value = expsymbol.tau_squared_series(sym, 0.0)
    expected = 2413.0 / 5184.0
    product = expsymbol.tau_det(sym, 0.0)
    rx = linsys.rx_matrix(expsymbol.to_realization(sym), 0.0)
    plus = np.linalg.det(np.eye(2) + rx)
    error = max(abs(value - expected), abs(product * plus - expected)) / expected
    return Measurement(error, ctx.gate(1e-10), "lambda = (1, 2), xi = (1, 1): 2413/5184")


@check("expsymbol", "cauchy-binet-gramians")
def _cauchy_binet_gramians(ctx: CheckContext) -> Measurement:
    rng = ctx.rng(3)
    worst = 0.0
    for _ in range(8):
        sym = random_symbol(rng, int(rng.integers(1, 7)))
        for t in (0.0, 0.5):
            series = expsymbol.tau_squared_series(sym, t)
            gram = linsys.tau_from_gramians(expsymbol.to_realization(sym), t)
            worst = max(worst, abs(series - gram) / max(1e-300, abs(gram)))
    return Measurement(worst, ctx.gate(1e-10), "minor expansion against det(I - Q L)")


@check("expsymbol", "oracle-panel-doubling")
def _exp_doubling(ctx: CheckContext) -> Measurement:
    sym = expsymbol.ExpSymbol([1.0, 2.0], [1.0, 1.0])
    panels = hankel_grid(sym).panels
    worst = max(abs(hankel_tau(sym, t, 2 * panels) - hankel_tau(sym, t, panels)) for t in (0.0, 0.5))
    return Measurement(worst, ctx.gate(1e-10), f"Hankel oracle at {panels} and {2 * panels} panels", {"panels": panels})


@check("expsymbol", "hook-length-identity")
def _hook_identity(ctx: CheckContext) -> Measurement:
    mismatches = [n for n in range(9) if sum(expsymbol.dimension(p) ** 2 for p in expsymbol.partitions(n)) != math.factorial(n)]
    return Measurement(float(len(mismatches)), 0.0, "sum dim^2 = n! for n <= 8", {"mismatches": mismatches}, passed=not mismatches)


@check("expsymbol", "frobenius-ratio")
def _frobenius_ratio(ctx: CheckContext) -> Measurement:
    worst = 0.0
    for n in range(1, 8):
        for part in expsymbol.partitions(n):
            exact = expsymbol.dimension(part) / math.factorial(n)
            worst = max(worst, abs(expsymbol.frobenius_ratio(part) - exact) / exact)
    return Measurement(worst, ctx.gate(1e-12), "Frobenius determinant against dim/|lambda|!")


@check("expsymbol", "higher-pole-limit")
def _higher_poles(ctx: CheckContext) -> Measurement:
    eps = 1e-5
    sym = expsymbol.resolve_higher_poles([expsymbol.PolyExpTerm(1.0, 1, 1.0)], eps)
    xs = np.linspace(0.0, 4.0, 9)
    error = float(np.max(np.abs(sym(xs) - xs * np.exp(-xs))))
    return Measurement(error, ctx.gate(1e-4), "backward difference of e^{-lam t} tends to t e^{-t}")


# hardedge


@check("hardedge", "three-way-agreement")
def _three_way(ctx: CheckContext) -> Measurement:
    p = BesselParams(nu=0.0, N=30, weight_cap=10)
    rows = hardedge.three_way(p, np.linspace(0.5, 3.0, 6), threads=ctx.threads)
    data = {
        "printed_deviation": max(r.printed_deviation for r in rows),
        "parts_sign_deviation": max(r.parts_sign_deviation for r in rows),
    }
    return Measurement(max(r.max_gap for r in rows), ctx.gate(1e-7), "series, Hill and oracle pairwise", data)


@check("hardedge", "oracle-panel-doubling")
def _bessel_doubling(ctx: CheckContext) -> Measurement:
    p = BesselParams(nu=0.0, N=30, weight_cap=10)
    panels = hardedge.oracle_grid(p).panels

    def change(x: float) -> float:
        return abs(hardedge.tau_oracle(p, x, panels=2 * panels) - hardedge.tau_oracle(p, x, panels=panels))

    worst = max(numkit.parallel_map(change, [0.5, 2.0], ctx.threads))
    return Measurement(worst, ctx.gate(1e-10), f"oracle at {panels} and {2 * panels} panels", {"panels": panels})


@check("hardedge", "printed-hill-form")
def _printed_form(ctx: CheckContext) -> Measurement:
    p = BesselParams(nu=0.0, N=30, weight_cap=10)
    deviation = abs(hardedge.tau_hill(p, 1.0, form="printed") - hardedge.tau_oracle(p, 1.0))
    return Measurement(deviation, math.inf, "reported only", {"x": 1.0}, passed=True)


# lame


def _lame_symbol(ctx: CheckContext, M: int = 32) -> lame.LameSymbol:
    params = ctx.cached("elliptic-0.5", lambda: EllipticParams.from_k2(0.5))
    return lame.LameSymbol(params=params, alpha=1.5 * params.K, M=M)


@check("lame", "lattice-invariants")
def _lame_invariants(ctx: CheckContext) -> Measurement:
    params = EllipticParams.from_k2(0.5)
    error = max(abs(params.e1 - 0.5), abs(params.e2), abs(params.e3 + 0.5))
    return Measurement(error, ctx.gate(1e-15), "k^2 = 1/2 gives (e1, e2, e3) = (1/2, 0, -1/2)")


@check("lame", "weierstrass-ode")
def _weierstrass_ode(ctx: CheckContext) -> Measurement:
    params = EllipticParams.from_k2(0.5)
    z = np.array([0.3 + 0.2j, 0.9 + 0.5j, 1.4 - 0.3j])
    wp, dwp = lame.weierstrass_p(z, params)
    residual = np.abs(dwp**2 - (4.0 * wp**3 - params.g2 * wp - params.g3)) / np.maximum(1.0, np.abs(dwp) ** 2)
    return Measurement(float(np.max(residual)), ctx.gate(1e-9), "P'^2 = 4P^3 - g2 P - g3")


@check("lame", "lame-equation")
def _lame_equation(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    worst = 0.0
    for x in (0.7 + 1j * sym.params.Kp, 1.3 + 1j * sym.params.Kp, 2.2 + 0.5j):
        scale = max(1.0, abs(lame.lame_psi(x, sym)))
        worst = max(worst, lame.lame_ode_residual(x, sym) / scale)
    return Measurement(worst, ctx.gate(1e-7), "Psi'' = (2 P(x) + P(alpha)) Psi, five-point stencil")


@check("lame", "quasi-periodicity")
def _quasi_periodicity(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    x = 0.7 + 1j * sym.params.Kp
    left = lame.lame_psi(x + 2.0 * sym.params.K, sym)
    right = np.exp(-sym.beta) * lame.lame_psi(x, sym)
    return Measurement(abs(left - right) / abs(right), ctx.gate(1e-9), "Psi(x + 2K) = e^{-beta} Psi(x)")


def random_lame(rng: np.random.Generator) -> Tuple[lame.LameSymbol, complex]:
    """Random modulus and alpha with Re beta > 0, plus a point on the line x + iK'."""
    while True:
        params = EllipticParams.from_k2(float(rng.uniform(0.1, 0.9)))
        alpha = complex(rng.uniform(1.1, 1.9) * params.K, rng.uniform(-0.3, 0.3) * params.Kp)
        if lame.beta_exponent(params, alpha, require_decay=False).real > 0.0:
            break
    x = complex(rng.uniform(0.1, 2.0 * params.K - 0.1), params.Kp)
    return lame.LameSymbol(params=params, alpha=alpha), x


@check("lame", "psi-product")
def _psi_product(ctx: CheckContext) -> Measurement:
    rng = ctx.rng(4)
    product_gap = shift_gap = 0.0
    for _ in range(100):
        sym, x = random_lame(rng)
        wp_alpha, _ = lame.weierstrass_p(sym.alpha, sym.params)
        wp_x, _ = lame.weierstrass_p(x, sym.params)
        product = lame.lame_psi(x, sym) * lame.lame_psi(-x, sym)
        scale = max(1.0, abs(wp_alpha), abs(wp_x))
        product_gap = max(product_gap, abs(product - (wp_alpha - wp_x)) / scale)
        right = np.exp(-sym.beta) * lame.lame_psi(x, sym)
        shift_gap = max(shift_gap, abs(lame.lame_psi(x + sym.period, sym) - right) / abs(right))
    data = {"product": product_gap, "quasi_periodicity": shift_gap}
    return Measurement(max(product_gap, shift_gap), ctx.gate(1e-9), "Psi(x) Psi(-x) = P(alpha) - P(x) and Psi(x + 2K) = e^{-beta} Psi(x), 100 draws", data)


@check("lame", "theta-reference")
def _theta_reference(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    worst = 0.0
    for x in (0.4 + 1j * sym.params.Kp, 1.1 + 0.3j, 2.5 + 1.2j):
        ref = lame.lame_psi_reference(x, sym)
        worst = max(worst, abs(lame.lame_psi(x, sym) - ref) / abs(ref))
    return Measurement(worst, ctx.gate(1e-10), "theta-series Psi against mpmath")


@check("lame", "expansion-reconstruction")
def _expansion(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx, M=64)
    expansion = lame.exp_expansion(sym)
    xs = np.linspace(0.1, sym.period - 0.1, 15)
    exact = sym.symbol(xs)
    error = float(np.max(np.abs(expansion(xs) - exact)) / np.max(np.abs(exact)))
    return Measurement(error, ctx.gate(1e-8), "bilateral series against Psi on one period, M = 64")


@check("lame", "lattice-sum")
def _lattice_sum(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    value = lame.lattice_sum(sym.beta, sym.params.K)
    closed = lame.lattice_sum_closed(sym.beta, sym.params.K)
    return Measurement(abs(value - closed) / abs(closed), ctx.gate(1e-8), "sum 1/|lambda_j + lambda_k|^2 closed form")


@check("lame", "gram-riesz-bound")
def _gram_riesz(ctx: CheckContext) -> Measurement:
    params = ctx.cached("elliptic-0.5", lambda: EllipticParams.from_k2(0.5))
    beta = lame.beta_exponent(params, 1.1 * params.K)
    coarse = lame.bilateral_gram_condition(beta, params.K, 32)
    fine = lame.bilateral_gram_condition(beta, params.K, 64)
    ratio = fine / coarse
    data = {"cond_32": coarse, "cond_64": fine}
    return Measurement(ratio - 1.0, ctx.gate(0.05), "cond(M = 64) / cond(M = 32) - 1 at alpha = 1.1K", data)


@check("lame", "oracle-panel-doubling")
def _lame_doubling(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    panels = lame.oracle_grid(sym, nodes=24).panels
    ts = [0.0, 1.0]
    coarse = lame.hankel_oracle(sym, ts, nodes=24, panels=panels, threads=ctx.threads)
    fine = lame.hankel_oracle(sym, ts, nodes=24, panels=2 * panels, threads=ctx.threads)
    worst = float(np.max(np.abs(fine - coarse)))
    return Measurement(worst, ctx.gate(1e-10), f"Hankel oracle at {panels} and {2 * panels} panels", {"panels": panels})


@check("lame", "tau-against-oracle")
def _lame_tau(ctx: CheckContext) -> Measurement:
    sym = _lame_symbol(ctx)
    ts = np.linspace(0.0, 1.8, 10)
    curve = lame.tau_lame(sym, ts, threads=ctx.threads)
    oracle = lame.hankel_oracle(sym, ts, threads=ctx.threads)
    error = float(np.max(np.abs(curve.taus - oracle)))
    return Measurement(error, ctx.gate(1e-7), "finite determinant against Nystrom Hankel determinant")


# cauchydet


@check("cauchydet", "heine-identity")
def _heine(ctx: CheckContext) -> Measurement:
    worst = 0.0
    for n in (1, 2, 4, 8, 16):
        spec = cauchydet.ProgressionSpec(1.0 + 0.3j, 1.0, n)
        direct = cauchydet.cauchy_det(cauchydet.progression(spec))
        toeplitz = cauchydet.toeplitz_form(spec).det
        worst = max(worst, abs(direct - toeplitz) / abs(direct))
    return Measurement(worst, ctx.gate(1e-10), "Cauchy determinant equals the Toeplitz determinant")


@check("cauchydet", "growth-limit")
def _growth(ctx: CheckContext) -> Measurement:
    report = cauchydet.growth_check(1.0, 1.0, (4, 8, 16, 32, 64))
    ok = report.gaps_decreasing and report.within_envelope and report.slope < -1.0 / 3.0
    data = {
        "limit": report.limit,
        "slope": report.slope,
        "fitted_C": report.fitted_C,
        "envelope_ratios": report.envelope_ratios,
        "roots": [row.root for row in report.rows],
    }
    detail = f"D_N^(1/N) -> {report.limit:.10g}, slope {report.slope:.3f}"
    return Measurement(report.rows[-1].gap, math.inf, detail, data, passed=ok)


@check("cauchydet", "haar-monte-carlo")
def _haar(ctx: CheckContext) -> Measurement:
    worst = 0.0
    for n in (1, 2):
        spec = cauchydet.ProgressionSpec(1.0, 1.0, n)
        est = cauchydet.haar_mc(spec, 20_000, ctx.seed, threads=ctx.threads)
        exact = cauchydet.cauchy_det(cauchydet.progression(spec))
        worst = max(worst, abs(est.estimate - exact) / est.stderr)
    return Measurement(worst, max(3.0, ctx.tol), "Haar average within 3 standard errors")


# pvi


def _pvi_state(ctx: CheckContext):
    def build():
        p = example_pvi()
        series = pvi.laurent_series(p, 120)
        phi0, mu = pvi.decaying_branch(series)
        return p, series, phi0, mu

    return ctx.cached("pvi", build)


@check("pvi", "recurrence-residual")
def _pvi_recurrence(ctx: CheckContext) -> Measurement:
    p, series, _, _ = _pvi_state(ctx)
    return Measurement(pvi.recurrence_residual(p, series.truncated(20)), ctx.gate(1e-12), "Sylvester recurrence, n <= 20")


@check("pvi", "ode-residual")
def _pvi_ode(ctx: CheckContext) -> Measurement:
    p, series, phi0, _ = _pvi_state(ctx)
    x = 5.0 * abs(p.t) + 10.0
    return Measurement(pvi.ode_residual(p, series, x, phi0), ctx.gate(1e-8), f"linear system at x = {x:g}")


@check("pvi", "schlesinger-identity")
def _pvi_schlesinger(ctx: CheckContext) -> Measurement:
    p, _, _, _ = _pvi_state(ctx)
    error = pvi.schlesinger_residual(p, [0.5 + 0.5j, -1.5, 3.0 + 1.0j, 7.0])
    return Measurement(error, ctx.gate(1e-12), "zero-curvature identity")


@check("pvi", "residue-factorization")
def _pvi_factors(ctx: CheckContext) -> Measurement:
    p, _, _, _ = _pvi_state(ctx)
    w = pvi.build_w(p)
    sigma = np.diag([1.0, -1.0])
    worst = 0.0
    for res, v, theta in zip(w.residues, w.factors, (p.theta0, p.theta1, p.thetat)):
        jw = pvi.J @ res
        worst = max(worst, float(np.max(np.abs(v.T @ sigma @ v - jw))), abs(np.linalg.det(jw) + theta**2 / 4.0))
    return Measurement(worst, ctx.gate(1e-12), "J W = V^T sigma V and det J W = -theta^2/4")


@check("pvi", "kernel-factorization")
def _pvi_kernel(ctx: CheckContext) -> Measurement:
    p, series, phi0, _ = _pvi_state(ctx)
    direct = pvi.kernel_k(p, series, phi0, 3.0, 4.0)
    factored = pvi.factorized_kernel(p, series, phi0, 3.0, 4.0)
    return Measurement(abs(direct - factored), ctx.gate(1e-6), "K(3, 4) against int <sigma phi, phi>")


@check("pvi", "kernel-dt-rank")
def _pvi_rank(ctx: CheckContext) -> Measurement:
    p, series, phi0, _ = _pvi_state(ctx)
    matrix = pvi.kernel_dt_matrix(p, series, phi0, np.linspace(3.0, 10.0, 8))
    singular = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.count_nonzero(singular > 1e-10 * singular[0]))
    return Measurement(float(rank), 2.0, "numerical rank of dK/dt", {"singular_values": singular.tolist()}, passed=rank <= 2)


@check("pvi", "realization")
def _pvi_realization(ctx: CheckContext) -> Measurement:
    p, series, phi0, mu = _pvi_state(ctx)
    sys = pvi.realize(p, series, phi0, float(np.real(mu)), x0=6.0, threads=ctx.threads)
    worst = 0.0
    for x in (0.5, 1.0, 2.0):
        exact = pvi.stacked_phi(p, series, phi0, 6.0 + x)
        approx = sys.symbol_value(x)[:, 0]
        worst = max(worst, float(np.linalg.norm(approx - exact) / np.linalg.norm(exact)))
    return Measurement(worst, ctx.gate(1e-6), "Laplace-Laguerre realization reproduces phi(x0 + x)")


# hypergeom


def _hg_state(ctx: CheckContext):
    def build():
        p = example_hypergeometric()
        return p, hypergeom.integrate_system(p, lam_end=1.05)

    return ctx.cached("hypergeom", build)


@check("hypergeom", "loewner-representation")
def _loewner(ctx: CheckContext) -> Measurement:
    worst = 0.0
    for c0 in (0.3, 0.5, 0.7):
        for lam in np.linspace(1.1, 10.0, 12):
            exact = hypergeom.loewner_function(c0, lam)
            worst = max(worst, abs(hypergeom.loewner_rep(c0, lam) - exact) / exact)
    p = example_hypergeometric()
    worst = max(worst, hypergeom.loewner_diagonal(p, 2.0, 3.0).gap)
    return Measurement(worst, ctx.gate(1e-8), "Stieltjes representation against the closed form")


@check("hypergeom", "system-residual")
def _hg_residual(ctx: CheckContext) -> Measurement:
    _, sol = _hg_state(ctx)
    worst = max(sol.residual(lam) for lam in (1.5, 2.0, 3.0, 5.0, 10.0, 100.0))
    return Measurement(worst, ctx.gate(1e-8), "dPsi/dl - W Psi at checkpoints")


@check("hypergeom", "seed-consistency")
def _hg_seed(ctx: CheckContext) -> Measurement:
    _, sol = _hg_state(ctx)
    return Measurement(sol.seed_consistency(), ctx.gate(1e-6), "integrated Psi against Liouville-Green at lam_start/2")


@check("hypergeom", "derivative-identity")
def _hg_identity(ctx: CheckContext) -> Measurement:
    p, sol = _hg_state(ctx)
    return Measurement(hypergeom.derivative_identity_residual(p, sol, 2.0, 3.0), ctx.gate(1e-6), "(d/dx + d/dy)[(x - y) K] at (2, 3)")


@check("hypergeom", "signature-split")
def _hg_split(ctx: CheckContext) -> Measurement:
    p, sol = _hg_state(ctx)
    grid = np.array([1.5, 2.0, 3.0, 5.0])
    k0, k1 = hypergeom.signature_split(p, sol, grid)
    direct = hypergeom.kernel_k5(p, sol, grid[:, None], grid[None, :])
    gap = float(np.max(np.abs(k0 - k1 - direct)) / np.max(np.abs(direct)))
    min_eig = min(float(np.linalg.eigvalsh(k0)[0]), float(np.linalg.eigvalsh(k1)[0]))
    data = {"min_eig": min_eig}
    return Measurement(gap, ctx.gate(1e-6), "K = K0 - K1 with positive parts", data)


@check("hypergeom", "fredholm-plateau")
def _hg_plateau(ctx: CheckContext) -> Measurement:
    p, sol = _hg_state(ctx)
    value, panels, history = hypergeom.fredholm_plateau(p, sol, 0.1, tol=ctx.gate(1e-8))
    spectrum = hypergeom.kernel_spectrum(hypergeom.fredholm_matrix(p, sol, 0.1, panels))
    data = {"det": value, "panels": panels, "eig_min": float(spectrum[0]), "eig_max": float(spectrum[-1])}
    return Measurement(abs(history[-1] - history[-2]), ctx.gate(1e-8), f"det(I - K P) = {value:.12g}", data)
