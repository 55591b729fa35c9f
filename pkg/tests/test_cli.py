import json

import pytest
from numpy.testing import assert_allclose

from taulab import cli
from taulab.errors import ParseError
from taulab.storage import OutputManager


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_number():
    assert cli.parse_number("1.5", "lambda") == 1.5
    assert cli.parse_number(" 1+0.5i ", "lambda") == 1 + 0.5j
    with pytest.raises(ParseError) as info:
        cli.parse_number("abc", "xi", 2)
    assert "xi[2]" in str(info.value)
    assert info.value.context == {"field": "xi", "position": 2}


def test_parse_list():
    assert cli.parse_list("", "lambda") == []
    assert cli.parse_list("1,2.5", "lambda", real=True) == [1.0, 2.5]
    with pytest.raises(ParseError):
        cli.parse_list("1,2j", "N", real=True)


def test_parse_grid_includes_stop():
    assert_allclose(cli.parse_grid("0:1:0.1"), [0.1 * k for k in range(11)])
    assert_allclose(cli.parse_grid("0.5,2,3"), [0.5, 2.0, 3.0])
    assert cli.parse_grid("2:2:1").tolist() == [2.0]


@pytest.mark.parametrize("text", ["", "0:1", "1:0:0.1", "0:1:0", "a:1:0.1"])
def test_parse_grid_errors(text):
    with pytest.raises(ParseError):
        cli.parse_grid(text)


def test_config_layering(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 5, "tol": 1e-9, "threads": 2, "unknown": 1}), encoding="utf-8")
    args = cli.build_parser().parse_args(["check", "--config", str(path), "--seed", "7"])
    config = cli.load_config(args)
    assert config.seed == 7
    assert config.tol == 1e-9
    assert config.threads == 2


def test_unreadable_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2]", encoding="utf-8")
    args = cli.build_parser().parse_args(["check", "--config", str(path)])
    with pytest.raises(ParseError):
        cli.load_config(args)
    args = cli.build_parser().parse_args(["check", "--config", str(tmp_path / "missing.json")])
    with pytest.raises(ParseError):
        cli.load_config(args)


def test_exp_driver_writes_table_and_manifest(capsys, out_dir):
    code, out, _ = run(capsys, "exp", "--lambda", "1", "--xi", "1", "--grid", "0:1:0.5", "--out", str(out_dir))
    assert code == cli.EXIT_OK
    run_id = out.strip().splitlines()[-1]
    storage = OutputManager(str(out_dir))
    table = storage.read_table_csv(out_dir / run_id / "exp.csv")
    assert table["t"] == [0.0, 0.5, 1.0]
    assert table["tau"][0] == pytest.approx(0.5, rel=1e-14)
    manifest = storage.load_manifest(out_dir / run_id / "exp.json")
    assert manifest.runId == run_id
    assert manifest.command[:2] == ["taulab", "exp"]
    assert manifest.parameters["lambda"] == [[1.0, 0.0]]
    assert "exp" in manifest.outputs


def test_exp_driver_empty_symbol(capsys, out_dir):
    code, out, _ = run(capsys, "exp", "--grid", "0,1", "--out", str(out_dir))
    assert code == cli.EXIT_OK
    run_id = out.strip().splitlines()[-1]
    table = OutputManager(str(out_dir)).read_table_csv(out_dir / run_id / "exp.csv")
    assert table["tau"] == [1.0, 1.0]
    assert table["sigma"] == [0.0, 0.0]


@pytest.mark.parametrize(
    "argv",
    [
        ["exp", "--lambda", "1,1", "--xi", "1,1"],
        ["exp", "--lambda", "1,2", "--xi", "1"],
        ["exp", "--lambda", "x", "--xi", "1"],
        ["exp", "--lambda", "-1", "--xi", "1"],
        ["bessel", "--nu", "-2"],
        ["check", "--suite", "bogus"],
    ],
)
def test_domain_errors_exit_two(capsys, out_dir, argv):
    code, _, err = run(capsys, *argv, "--out", str(out_dir))
    assert code == cli.EXIT_USAGE
    assert "❌" in err


def test_cauchy_driver(capsys, out_dir):
    code, out, _ = run(capsys, "cauchy", "--N", "4,8", "--out", str(out_dir))
    assert code == cli.EXIT_OK
    run_id = out.strip().splitlines()[-1]
    table = OutputManager(str(out_dir)).read_table_csv(out_dir / run_id / "cauchy.csv")
    assert table["N"] == [4.0, 8.0]


def test_check_prints_json_verdict(capsys, out_dir):
    code, out, err = run(capsys, "check", "--suite", "numkit", "--out", str(out_dir))
    assert code == cli.EXIT_OK
    report = json.loads(out)
    assert report["passed"] is True
    assert report["suite"] == "numkit"
    assert (out_dir / report["runId"] / "check.json").exists()
    assert "passed, 0 failed" in err


def test_check_budget_failure_exits_one(capsys, out_dir):
    code, out, _ = run(capsys, "check", "--suite", "numkit", "--budget", "-1", "--out", str(out_dir))
    assert code == cli.EXIT_CHECK_FAILED
    assert json.loads(out)["passed"] is False


def test_bessel_driver_records_oracle_grid(capsys, out_dir):
    code, out, _ = run(capsys, "bessel", "--grid", "1", "--out", str(out_dir))
    assert code == cli.EXIT_OK
    run_id = out.strip().splitlines()[-1]
    storage = OutputManager(str(out_dir))
    manifest = storage.load_manifest(out_dir / run_id / "bessel.json")
    oracle = manifest.truncations["oracle"]
    assert set(oracle) == {"L", "domain", "panels", "nodes"}
    assert oracle["domain"][0] == 0.0
    assert oracle["L"] == pytest.approx(oracle["domain"][1])
    assert oracle["nodes"] == 24
    assert oracle["panels"] >= 1
    assert manifest.truncations["weight_cap"] == 10
    table = storage.read_table_csv(out_dir / run_id / "bessel.csv")
    assert table["max_gap"][0] < 1e-7
