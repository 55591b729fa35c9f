"""
Command-line front end.

Each driver evaluates one family of tau functions on a grid, writes
``<name>.csv`` and a ``<name>.json`` run manifest into a fresh run directory
and prints the run id. ``check`` runs the invariant suites and prints a JSON
verdict. Exit codes: 0 ok, 1 check failure, 2 usage or domain error,
3 numerical error.
"""

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import cauchydet, expsymbol, hardedge, hypergeom, lame, linsys, pvi
from .config import TaulabConfig, configure_logging, settings
from .errors import ParseError, TaulabError
from .models import BesselParams, EllipticParams, HgParams, PviParams, RunManifest, generate_run_id
from .runner import CheckRunner
from .storage import OutputManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def parse_number(text: str, field: str, position: Optional[int] = None) -> complex:
    """Parse a real or complex literal such as 1.5, -2e-3 or 1+0.5j."""
    where = field if position is None else f"{field}[{position}]"
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ParseError(f"{where}: cannot parse {text!r} as a number", context={"field": field, "position": position}) from None


def parse_real(text: str, field: str, position: Optional[int] = None) -> float:
    value = parse_number(text, field, position)
    if value.imag != 0.0:
        raise ParseError(f"{field}: expected a real number, got {text!r}", context={"field": field, "position": position})
    return value.real


def parse_list(text: Optional[str], field: str, real: bool = False) -> List[complex]:
    """Comma-separated numbers; an empty string is an empty list."""
    if text is None or not text.strip():
        return []
    parser = parse_real if real else parse_number
    return [parser(item, field, i) for i, item in enumerate(text.split(","))]


def parse_grid(text: str, field: str = "grid") -> np.ndarray:
    """``start:stop:step`` with stop included, or a comma list."""
    if ":" not in text:
        values = np.asarray(parse_list(text, field, real=True), dtype=float)
        if values.size == 0:
            raise ParseError(f"{field}: empty grid", context={"field": field})
        return values
    parts = text.split(":")
    if len(parts) != 3:
        raise ParseError(f"{field}: expected start:stop:step, got {text!r}", context={"field": field})
    start, stop, step = (parse_real(part, field, i) for i, part in enumerate(parts))
    if not step > 0.0 or stop < start:
        raise ParseError(f"{field}: need step > 0 and stop >= start, got {text!r}", context={"field": field})
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def load_config(args: argparse.Namespace) -> TaulabConfig:
    """Defaults < environment < --config JSON < command-line flags."""
    config = replace(settings)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                overrides = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ParseError(f"--config: cannot read {args.config}: {e}", context={"field": "config"}) from e
        if not isinstance(overrides, dict):
            raise ParseError("--config must hold a flat JSON object", context={"field": "config"})
        config = config.from_overrides(overrides)
    flags = {
        "threads": args.threads,
        "output_dir": args.out,
        "log_level": args.log_level,
        "tol": args.tol,
        "seed": args.seed,
    }
    return config.from_overrides(flags)


class Driver:
    """Shared plumbing of one driver invocation: run directory, outputs, manifest."""

    def __init__(self, name: str, suite: str, args: argparse.Namespace, config: TaulabConfig, argv: Sequence[str]):
        self.name = name
        self.suite = suite
        self.args = args
        self.config = config
        self.storage = OutputManager(config.output_dir)
        self.manifest = RunManifest(runId=generate_run_id(), command=list(argv), config=config.snapshot())
        self.started = time.perf_counter()

    def write_table(self, columns: Dict[str, Any], name: Optional[str] = None) -> None:
        name = name or self.name
        path = self.storage.write_table_csv(self.manifest.runId, name, columns)
        self.manifest.outputs[name] = str(path)

    def finish(self) -> int:
        """Optionally run the module suite, then write the manifest."""
        code = EXIT_OK
        if getattr(self.args, "check", False):
            runner = CheckRunner(self.storage)
            report = runner.run(
                self.suite,
                seed=self.config.seed,
                tol=self.config.tol,
                budget=self.config.runtime_budget,
                threads=self.config.threads,
                run_id=self.manifest.runId,
            )
            self.manifest.checks = report.checks
            code = EXIT_OK if report.passed else EXIT_CHECK_FAILED
        self.manifest.wall_time = time.perf_counter() - self.started
        self.storage.write_manifest(self.manifest, self.name)
        marker = "✅" if code == EXIT_OK else "❌"
        print(f"{marker} {self.name}: wrote {self.storage.get_run_path(self.manifest.runId)}", file=sys.stderr)
        print(self.manifest.runId)
        return code


def run_exp(driver: Driver) -> int:
    args = driver.args
    lambdas = parse_list(args.lambdas, "lambda")
    xis = parse_list(args.xi, "xi")
    if len(lambdas) != len(xis):
        raise ParseError(f"--lambda has {len(lambdas)} entries but --xi has {len(xis)}", context={"field": "xi"})
    sym = expsymbol.ExpSymbol(np.asarray(lambdas, dtype=complex), np.asarray(xis, dtype=complex))
    ts = parse_grid(args.grid)
    if sym.size == 0:
        curve = linsys.TauCurve(ts, np.ones_like(ts), np.zeros_like(ts))
    else:
        realization = expsymbol.to_realization(sym)
        curve = linsys.TauCurve.from_function(
            ts,
            lambda t: expsymbol.tau_det(sym, t),
            lambda t: linsys.resolvent_trace(realization, t),
            threads=driver.config.threads,
        )
    driver.manifest.parameters = {
        "lambda": [[z.real, z.imag] for z in lambdas],
        "xi": [[z.real, z.imag] for z in xis],
        "grid": args.grid,
    }
    driver.write_table(curve.columns())
    return driver.finish()


def run_bessel(driver: Driver) -> int:
    args = driver.args
    p = BesselParams(nu=args.nu, N=args.N, weight_cap=args.weight_cap)
    xs = parse_grid(args.grid)
    rows = hardedge.three_way(p, xs, threads=driver.config.threads)
    driver.manifest.parameters = p.model_dump()
    driver.manifest.truncations = {"N": p.N, "weight_cap": p.weight_cap, "oracle": hardedge.oracle_grid(p).summary()}
    driver.manifest.tolerances = {"three_way": max(1e-7, driver.config.tol)}
    driver.write_table(
        {
            "x": [r.x for r in rows],
            "series": [r.series for r in rows],
            "hill": [r.hill for r in rows],
            "oracle": [r.oracle for r in rows],
            "printed_hill": [r.printed for r in rows],
            "parts_sign_series": [r.parts_sign_series for r in rows],
            "max_gap": [r.max_gap for r in rows],
        }
    )
    worst = max((r.max_gap for r in rows), default=0.0)
    print(f"{'✅' if worst <= driver.manifest.tolerances['three_way'] else '⚠️'} three-way max gap {worst:.3e}", file=sys.stderr)
    return driver.finish()


def run_lame(driver: Driver) -> int:
    args = driver.args
    params = EllipticParams.from_k2(args.k2)
    alpha = complex(args.alpha_over_K * params.K, args.alpha_imag)
    sym = lame.LameSymbol(params=params, alpha=alpha, t=args.t, M=args.M)
    ts = parse_grid(args.grid)
    if args.auto:
        curve, M = lame.auto_truncation(sym, ts, tol=max(1e-9, driver.config.tol), threads=driver.config.threads)
    else:
        curve, M = lame.tau_lame(sym, ts, threads=driver.config.threads), sym.M
    driver.manifest.parameters = {
        "k2": params.k2,
        "K": params.K,
        "Kp": params.Kp,
        "e1": params.e1,
        "e2": params.e2,
        "e3": params.e3,
        "g2": params.g2,
        "g3": params.g3,
        "alpha": [alpha.real, alpha.imag],
        "beta": [sym.beta.real, sym.beta.imag],
        "t": args.t,
    }
    driver.manifest.truncations = {"M": M, "auto": bool(args.auto)}
    driver.write_table(curve.columns())
    return driver.finish()


def run_cauchy(driver: Driver) -> int:
    args = driver.args
    beta = parse_number(args.beta, "beta")
    Ns = [int(n) for n in parse_list(args.N, "N", real=True)]
    report = cauchydet.growth_check(beta, args.K, Ns)
    driver.manifest.parameters = {"beta": [beta.real, beta.imag], "K": args.K, "N": Ns}
    driver.manifest.truncations = {"limit": report.limit, "fitted_C": report.fitted_C, "slope": report.slope}
    driver.write_table(
        {
            "N": [row.N for row in report.rows],
            "root": [row.root for row in report.rows],
            "gap": [row.gap for row in report.rows],
        }
    )
    if args.haar_samples:
        small = [n for n in Ns if n <= 6]
        estimates = [cauchydet.haar_mc(cauchydet.ProgressionSpec(beta, args.K, n), args.haar_samples, driver.config.seed, driver.config.threads) for n in small]
        exact = [cauchydet.cauchy_det(cauchydet.progression(cauchydet.ProgressionSpec(beta, args.K, n))) for n in small]
        driver.write_table(
            {
                "N": small,
                "exact": exact,
                "estimate": [e.estimate for e in estimates],
                "stderr": [e.stderr for e in estimates],
            },
            name="haar",
        )
    print(f"✅ D_N^(1/N) -> K/sinh(Re beta) = {report.limit:.10g}; last root {report.rows[-1].root:.10g}", file=sys.stderr)
    return driver.finish()


def run_pvi(driver: Driver) -> int:
    args = driver.args
    p = PviParams.triangular(args.theta0, args.theta1, args.thetat, args.z0, args.z1, args.zt, args.u0, args.u1, args.t)
    series = pvi.laurent_series(p, args.M)
    phi0, mu = pvi.decaying_branch(series)
    xs = parse_grid(args.grid)
    values = np.array([pvi.phi_eval(series, x, phi0) for x in xs])
    diagonal = [pvi.kernel_k(p, series, phi0, x, x) for x in xs]
    driver.manifest.parameters = p.model_dump()
    driver.manifest.truncations = {"M": args.M, "growth": series.growth, "mu": [mu.real, mu.imag]}
    driver.write_table({"x": xs, "phi_1": values[:, 0], "phi_2": values[:, 1], "kernel_diag": diagonal})
    return driver.finish()


def run_hypergeom(driver: Driver) -> int:
    args = driver.args
    p = HgParams(a=args.a, b=-args.a, c=args.c)
    sol = hypergeom.integrate_system(p, lam_end=1.0 + args.delta / 2.0, lam_start=args.lam_start)
    xs = parse_grid(args.grid)
    values = sol.psi(xs)
    diagonal = hypergeom.kernel_k5(p, sol, xs, xs)
    det, panels, history = hypergeom.fredholm_plateau(p, sol, args.delta, tol=max(1e-8, driver.config.tol))
    driver.manifest.parameters = {"a": p.a, "b": p.b, "c": p.c, "delta": args.delta, "det": det}
    driver.manifest.truncations = {"lam_start": args.lam_start, "panels": panels, "plateau": [float(np.real(v)) for v in history]}
    driver.write_table({"x": xs, "psi_1": values[:, 0], "psi_2": values[:, 1], "kernel_diag": np.atleast_1d(diagonal)})
    print(f"✅ det(I - K P) = {det:.12g} at {panels} panels", file=sys.stderr)
    return driver.finish()


def run_check(args: argparse.Namespace, config: TaulabConfig) -> int:
    budget = config.runtime_budget if args.budget is None else args.budget
    runner = CheckRunner(OutputManager(config.output_dir))
    report = runner.run(args.suite, seed=config.seed, tol=config.tol, budget=budget, threads=config.threads)
    runner.storage.write_json(report.runId, "check", report)
    print(json.dumps(report.model_dump(), indent=2))
    failed = len(report.failures)
    print(f"{'✅' if report.passed else '❌'} {len(report.checks) - failed} passed, {failed} failed", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON file of option values")
    parser.add_argument("--out", help="output directory (TAULAB_OUTPUT_DIR)")
    parser.add_argument("--threads", type=int, help="thread cap (TAULAB_THREADS)")
    parser.add_argument("--log-level", dest="log_level", help="logging level (TAULAB_LOG_LEVEL)")
    parser.add_argument("--tol", type=float, help="tolerance floor; every gate becomes max(gate, tol)")
    parser.add_argument("--seed", type=int, help="seed for randomized checks and Monte Carlo")


def _driver(sub, name: str, help_text: str, suite: str, handler: Callable[[Driver], int]) -> argparse.ArgumentParser:
    parser = sub.add_parser(name, help=help_text)
    _shared(parser)
    parser.add_argument("--check", action="store_true", help=f"run the {suite} suite afterwards")
    parser.set_defaults(handler=handler, suite=suite)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taulab", description="Tau functions and Fredholm determinants.")
    sub = parser.add_subparsers(dest="command", required=True)

    exp = _driver(sub, "exp", "tau curve of a finite exponential symbol", "expsymbol", run_exp)
    exp.add_argument("--lambda", dest="lambdas", default="", help="comma list of exponents, Re > 0")
    exp.add_argument("--xi", default="", help="comma list of coefficients")
    exp.add_argument("--grid", default="0:3:0.1", help="start:stop:step or comma list")

    bessel = _driver(sub, "bessel", "hard-edge three-way comparison", "hardedge", run_bessel)
    bessel.add_argument("--nu", type=float, default=0.0)
    bessel.add_argument("--N", type=int, default=30)
    bessel.add_argument("--weight-cap", dest="weight_cap", type=int, default=10)
    bessel.add_argument("--grid", default="0.5:3:0.1")

    lam = _driver(sub, "lame", "tau curve of the Lame symbol", "lame", run_lame)
    lam.add_argument("--k2", type=float, default=0.5)
    lam.add_argument("--alpha-over-K", dest="alpha_over_K", type=float, default=1.5, help="Re alpha in units of K")
    lam.add_argument("--alpha-imag", dest="alpha_imag", type=float, default=0.0)
    lam.add_argument("--t", type=float, default=0.0, help="base shift of the symbol")
    lam.add_argument("--M", type=int, default=32)
    lam.add_argument("--auto", action="store_true", help="double M until tau plateaus")
    lam.add_argument("--grid", default="0:2:0.2")

    cauchy = _driver(sub, "cauchy", "Cauchy determinant growth table", "cauchydet", run_cauchy)
    cauchy.add_argument("--beta", default="1")
    cauchy.add_argument("--K", type=float, default=1.0)
    cauchy.add_argument("--N", default="4,8,16,32,64")
    cauchy.add_argument("--haar-samples", dest="haar_samples", type=int, default=0)

    pv = _driver(sub, "pvi", "Painleve VI linear pair and kernel", "pvi", run_pvi)
    for flag, default in (
        ("theta0", 0.3), ("theta1", 0.4), ("thetat", 0.5),
        ("z0", -0.6), ("z1", -0.2), ("zt", -0.15),
        ("u0", 1.0), ("u1", 0.5), ("t", 2.0),
    ):
        pv.add_argument(f"--{flag}", type=float, default=default)
    pv.add_argument("--M", type=int, default=120)
    pv.add_argument("--grid", default="4:20:0.5")

    hg = _driver(sub, "hypergeom", "hypergeometric kernel and determinant", "hypergeom", run_hypergeom)
    hg.add_argument("--a", type=float, default=math.sqrt(2.0), help="b = -a")
    hg.add_argument("--c", type=float, default=0.5)
    hg.add_argument("--delta", type=float, default=0.1)
    hg.add_argument("--lam-start", dest="lam_start", type=float, default=hypergeom.LAMBDA_START)
    hg.add_argument("--grid", default="1.5:10:0.5")

    chk = sub.add_parser("check", help="run invariant suites")
    _shared(chk)
    chk.add_argument("--suite", default="all")
    chk.add_argument("--budget", type=float, help="wall-clock budget in seconds (TAULAB_RUNTIME_BUDGET)")
    chk.set_defaults(handler=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        configure_logging(config.log_level)
        if args.command == "check":
            return run_check(args, config)
        driver = Driver(args.command, args.suite, args, config, ["taulab"] + argv)
        return args.handler(driver)
    except TaulabError as e:
        logger.debug("%s failed: %r", args.command, e.context)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"❌ invalid parameters: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
