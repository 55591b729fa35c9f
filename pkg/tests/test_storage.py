import math

import numpy as np
import pytest

from taulab.errors import DomainError, NonFiniteOutputError
from taulab.models import CheckResult, RunManifest
from taulab.storage import OutputManager


@pytest.fixture
def storage(out_dir):
    return OutputManager(str(out_dir))


def test_table_round_trip(storage):
    path = storage.write_table_csv("run-a", "curve", {"t": [0.0, 0.5], "tau": [1.0, 1.0 / 3.0]})
    assert path.name == "curve.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,tau"
    assert lines[2] == "0.5,0.33333333333333331"
    columns = storage.read_table_csv(path)
    assert columns["tau"][1] == 1.0 / 3.0


def test_complex_column_gets_imag_companion(storage):
    path = storage.write_table_csv("run-a", "curve", {"t": [0.0], "tau": np.array([1.0 + 2.0j])})
    columns = storage.read_table_csv(path)
    assert list(columns) == ["t", "tau", "tau_imag"]
    assert columns["tau_imag"] == [2.0]


def test_table_shape_errors(storage):
    with pytest.raises(DomainError) as info:
        storage.write_table_csv("run-a", "bad", {"t": [0.0, 1.0], "tau": [1.0]})
    assert info.value.context == {"column": "tau", "rows": 1, "expected": 2}
    assert info.value.exit_code == 2
    with pytest.raises(DomainError) as info:
        storage.write_table_csv("run-a", "bad", {"t": np.zeros((2, 2))})
    assert str(info.value).startswith("[table-shape]")


def test_non_finite_table_is_rejected(storage):
    with pytest.raises(NonFiniteOutputError) as info:
        storage.write_table_csv("run-a", "curve", {"t": [0.0, 1.0], "tau": [1.0, math.nan]})
    assert info.value.context == {"column": "tau", "row": 1}
    assert info.value.exit_code == 3


def test_non_finite_json_is_rejected(storage):
    with pytest.raises(NonFiniteOutputError) as info:
        storage.write_json("run-a", "record", {"values": [1.0, math.inf]})
    assert info.value.context["path"] == "$.values[1]"


def test_manifest_round_trip(storage):
    manifest = RunManifest(
        runId="run-b",
        command=["taulab", "exp"],
        parameters={"grid": "0:1:0.5"},
        checks=[CheckResult(name="x", module="numkit", passed=True, error=1e-15, tolerance=1e-12)],
    )
    path = storage.write_manifest(manifest, "exp")
    loaded = storage.load_manifest(path)
    assert loaded == manifest


def test_list_and_cleanup(storage):
    assert list(storage.list_runs()) == []
    storage.create_run_directory("run-1")
    storage.create_run_directory("run-2")
    assert [p.name for p in storage.list_runs()] == ["run-1", "run-2"]
    assert storage.cleanup_run("run-1")
    assert storage.cleanup_run("missing")
    assert [p.name for p in storage.list_runs()] == ["run-2"]
