import numpy as np
import pytest

from taulab import checks
from taulab.errors import ConvergenceError
from taulab.runner import CheckRunner, resolve_suites
from taulab.storage import OutputManager


@pytest.fixture
def runner(out_dir):
    return CheckRunner(OutputManager(str(out_dir)))


def test_resolve_suites():
    assert resolve_suites("all") == list(checks.SUITE_ORDER)
    assert resolve_suites("pvi, numkit") == ["numkit", "pvi"]
    with pytest.raises(ValueError):
        resolve_suites("numkit,bogus")


def test_every_suite_has_checks():
    for name in checks.SUITE_ORDER:
        assert checks.SUITES[name], name


def test_gate_only_loosens():
    ctx = checks.CheckContext(tol=1e-6)
    assert ctx.gate(1e-10) == 1e-6
    assert ctx.gate(1e-3) == 1e-3


def test_numkit_suite_passes(runner, out_dir):
    report = runner.run("numkit", budget=60.0)
    assert report.status == "completed"
    assert report.passed
    assert [c.name for c in report.checks] == [name for name, _ in checks.SUITES["numkit"]]
    assert (out_dir / report.runId / "run.json").exists()
    assert (out_dir / report.runId / "state.json").exists()


def test_exhausted_budget_fails_remaining_checks(runner):
    report = runner.run("numkit", budget=-1.0)
    assert not report.passed
    assert report.checks
    assert all(c.detail == "runtime budget exceeded" for c in report.checks)


def test_numerical_errors_become_failed_results(runner, monkeypatch):
    def boom(ctx):
        raise ConvergenceError("no plateau", context={"panels": 64})

    monkeypatch.setitem(checks.SUITES, "numkit", [("boom", boom)])
    report = runner.run("numkit")
    assert report.status == "completed"
    assert not report.passed
    (result,) = report.failures
    assert result.detail.startswith("[convergence]")
    assert result.data == {"panels": 64}


def test_unexpected_exceptions_do_not_stop_the_run(runner, monkeypatch):
    def singular(ctx):
        raise np.linalg.LinAlgError("Singular matrix")

    def divide(ctx):
        raise ZeroDivisionError("float division by zero")

    def fine(ctx):
        return checks.Measurement(0.0, 1e-12, "ok")

    monkeypatch.setitem(checks.SUITES, "numkit", [("singular", singular), ("divide", divide), ("fine", fine)])
    report = runner.run("numkit")
    assert report.status == "completed"
    assert not report.errors
    assert [c.name for c in report.checks] == ["singular", "divide", "fine"]
    assert [c.passed for c in report.checks] == [False, False, True]
    assert report.checks[0].detail == "LinAlgError: Singular matrix"
    assert report.checks[1].detail.startswith("ZeroDivisionError")


def test_report_reloads_from_disk(runner, out_dir):
    report = runner.run("numkit", budget=60.0)
    fresh = CheckRunner(OutputManager(str(out_dir)))
    assert fresh.load_report(report.runId) == report
    assert fresh.load_report("run-missing") is None
