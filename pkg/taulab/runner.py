"""
Check runner - executes invariant suites and records their verdicts.
"""

import json
import logging
import sys
import time
import traceback
from typing import Dict, List, Optional

from .checks import SUITE_ORDER, SUITES, CheckContext
from .config import settings
from .errors import TaulabError
from .models import CheckResult, SuiteReport, generate_run_id
from .storage import OutputManager, output_manager

logger = logging.getLogger(__name__)


def resolve_suites(suite: str) -> List[str]:
    """Expand a --suite value ("all", one name, or a comma list) into run order."""
    if suite == "all":
        return list(SUITE_ORDER)
    names = [name.strip() for name in suite.split(",") if name.strip()]
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {list(SUITE_ORDER)} or 'all'")
    return [name for name in SUITE_ORDER if name in names]


class CheckRunner:
    """Runs check suites under a wall-clock budget and persists their state."""

    def __init__(self, storage: Optional[OutputManager] = None):
        self.storage = storage or output_manager
        self.completed_runs: Dict[str, SuiteReport] = {}

    def run(
        self,
        suite: str = "all",
        *,
        seed: int = 0,
        tol: float = 0.0,
        budget: Optional[float] = None,
        threads: Optional[int] = None,
        run_id: Optional[str] = None,
    ) -> SuiteReport:
        """
        Run the named suites in deterministic order.

        Args:
            suite: "all", a suite name or a comma list
            seed: Seed for every randomized check
            tol: Global tolerance floor, gates become max(gate, tol)
            budget: Wall-clock budget in seconds
            threads: Thread cap for parallel checks
            run_id: Existing run directory to write into

        Returns:
            SuiteReport with one CheckResult per registered check
        """
        names = resolve_suites(suite)
        budget = settings.runtime_budget if budget is None else float(budget)
        run_id = run_id or generate_run_id()
        report = SuiteReport(runId=run_id, suite=suite, status="queued", seed=seed, tol=tol, budget=budget)
        self.storage.create_run_directory(run_id)
        self._save_state(report)

        ctx = CheckContext(seed=seed, tol=tol, threads=threads)
        start = time.perf_counter()
        report.status = "running"
        self._save_state(report)
        try:
            for name in names:
                logger.info("suite %s: %d checks", name, len(SUITES[name]))
                for check_name, fn in SUITES[name]:
                    if time.perf_counter() - start > budget:
                        report.checks.append(
                            CheckResult(name=check_name, module=name, passed=False, detail="runtime budget exceeded")
                        )
                        continue
                    report.checks.append(self._run_check(name, check_name, fn, ctx))
                    self._save_state(report)
            report.passed = bool(report.checks) and not report.failures
            report.status = "completed"
        except Exception as e:
            report.status = "failed"
            report.errors.append(f"Run failed: {e}")
            logger.error("check run %s failed: %s", run_id, traceback.format_exc())
        finally:
            report.elapsed = time.perf_counter() - start
            self._save_state(report)
            self._save_final_run_json(report)
            self.completed_runs[run_id] = report
        return report

    def _run_check(self, module: str, name: str, fn, ctx: CheckContext) -> CheckResult:
        started = time.perf_counter()
        try:
            m = fn(ctx)
        except TaulabError as e:
            elapsed = time.perf_counter() - started
            print(f"❌ {module}/{name}: {e}", file=sys.stderr)
            return CheckResult(name=name, module=module, passed=False, elapsed=elapsed, detail=str(e), data=_jsonable(e.context))
        except Exception as e:
            elapsed = time.perf_counter() - started
            detail = f"{type(e).__name__}: {e}"
            logger.error("check %s/%s raised: %s", module, name, traceback.format_exc())
            print(f"❌ {module}/{name}: {detail}", file=sys.stderr)
            return CheckResult(name=name, module=module, passed=False, elapsed=elapsed, detail=detail)
        elapsed = time.perf_counter() - started
        error = float(m.error)
        passed = m.passed if m.passed is not None else bool(error <= m.tolerance)
        marker = "✅" if passed else "❌"
        print(f"{marker} {module}/{name}: error={error:.3e} gate={m.tolerance:.1e} ({elapsed:.2f}s)", file=sys.stderr)
        return CheckResult(
            name=name,
            module=module,
            passed=passed,
            error=error if _finite(error) else None,
            tolerance=m.tolerance if _finite(m.tolerance) else None,
            elapsed=elapsed,
            detail=m.detail,
            data=_jsonable(m.data or {}),
        )

    def _save_state(self, report: SuiteReport) -> None:
        """Save run state to <run>/state.json."""
        try:
            self.storage.write_json(report.runId, "state", report)
        except (OSError, TaulabError) as e:
            logger.warning("failed to save run state for %s: %s", report.runId, e)

    def _save_final_run_json(self, report: SuiteReport) -> None:
        """Save the final report to <run>/run.json."""
        try:
            path = self.storage.write_json(report.runId, "run", report)
            print(f"✅ Saved final run JSON: {path}", file=sys.stderr)
        except (OSError, TaulabError) as e:
            logger.error("failed to save final run JSON for %s: %s", report.runId, e)

    def load_report(self, run_id: str) -> Optional[SuiteReport]:
        """Load a finished report from disk."""
        if run_id in self.completed_runs:
            return self.completed_runs[run_id]
        path = self.storage.get_run_path(run_id) / "run.json"
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as f:
            report = SuiteReport(**json.load(f))
        self.completed_runs[run_id] = report
        return report


def _finite(value: float) -> bool:
    return value == value and value not in (float("inf"), float("-inf"))


def _jsonable(data: Dict) -> Dict:
    """Coerce numpy and complex values into JSON-friendly ones; non-finite floats become strings."""

    def convert(value):
        if isinstance(value, dict):
            return {str(k): convert(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)) or hasattr(value, "tolist"):
            raw = value.tolist() if hasattr(value, "tolist") else value
            return [convert(v) for v in raw] if isinstance(raw, list) else convert(raw)
        if isinstance(value, complex):
            return {"real": convert(value.real), "imag": convert(value.imag)}
        if isinstance(value, float):
            return value if _finite(value) else repr(value)
        if isinstance(value, (int, str, bool)) or value is None:
            return value
        try:
            return convert(float(value))
        except (TypeError, ValueError):
            return str(value)

    return convert(data)
