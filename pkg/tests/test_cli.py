import csv
import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from ghf import cli

SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "config.schema.json").read_text())


def run(tmp_path, config, *extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return cli.main(["run", str(path), "--out", str(tmp_path / "out"), *extra])


def report(tmp_path):
    return json.loads((tmp_path / "out" / "report.json").read_text())


def test_shipped_config_matches_schema():
    config = json.loads(resources.files("ghf.configs").joinpath("delta_tour.json").read_text())
    jsonschema.validate(config, SCHEMA)


def test_schema_rejects_unknown_op():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"tasks": [{"op": "integrate"}]}, SCHEMA)


def test_delta_tour_passes(tmp_path):
    assert cli.main(["run", "delta-tour", "--out", str(tmp_path / "out")]) == 0
    rep = report(tmp_path)
    assert rep["summary"]["failed"] == 0 and rep["summary"]["asserted"] == len(rep["tasks"])
    traces = sorted((tmp_path / "out" / "traces").glob("*.csv"))
    assert traces
    with traces[0].open() as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"eps", "rho_eps", "object", "quantity", "log_magnitude", "phase"}
    assert len({r["eps"] for r in rows}) == 24


def test_references_and_objects(tmp_path):
    config = {
        "objects": {"x": {"number": "rho^2"}, "D": {"set": {"disk": {"center": "0", "radius": "rho"}}}},
        "tasks": [
            {"id": "sq", "op": "evaluate", "args": {"f": "z^2", "at": "rho"}},
            {"id": "same", "op": "eq", "args": {"a": "$sq", "b": "x"}, "assert": True},
            {"id": "in", "op": "member", "args": {"z": "x", "set": "D"}, "assert": True},
            {"id": "tiny", "op": "classify", "args": {"x": "x"}, "assert": ["infinitesimal", "finite"]},
            {"id": "osc", "op": "classify", "args": {"x": "eps^-1 * sin(eps^-1)"}, "assert": "none-of-three"},
            {"id": "m", "op": "mayer", "args": {"x": "rho + rho^2"}, "assert": True},
            {"id": "neg", "op": "eq", "args": {"a": "exp(log(rho)/eps)", "b": 0}, "assert": "True"},
        ],
    }
    jsonschema.validate(config, SCHEMA)
    assert run(tmp_path, config) == 0


def test_failed_assertion_exits_1(tmp_path, capsys):
    config = {"tasks": [{"id": "ok", "op": "lt", "args": {"a": 0, "b": "rho"}, "assert": True},
                        {"id": "bad", "op": "eq", "args": {"a": "rho", "b": 0}, "assert": True}]}
    assert run(tmp_path, config) == 1
    assert "'bad'" in capsys.readouterr().err
    assert report(tmp_path)["summary"]["first_failure"] == "bad"


def test_task_exception_is_a_failure(tmp_path):
    config = {"tasks": [{"id": "boom", "op": "diff", "args": {"f": "conj(z)"}, "assert": True}]}
    assert run(tmp_path, config) == 1
    assert "error" in report(tmp_path)["tasks"][0]


@pytest.mark.parametrize("config", [
    {"tasks": [{"id": "a", "op": "integrate"}]},
    {"tasks": [{"id": "a", "op": "eq", "args": {"a": "$later", "b": 0}}]},
    {"tasks": [{"id": "a", "op": "eq", "args": {"a": "rho +", "b": 0}}]},
    {"gauge": "cubic", "tasks": []},
    {"objects": 3},
])
def test_config_errors_exit_2(tmp_path, config):
    assert run(tmp_path, config) == 2


def test_missing_config_exits_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 2


def test_overrides(tmp_path):
    config = {"tasks": [{"id": "o", "op": "order", "args": {"x": "rho"}}]}
    assert run(tmp_path, config, "--gauge", "eps2", "--grid", "0.5:0.8:16", "--order", "7", "--emit", "json") == 0
    rep = report(tmp_path)
    assert rep["gauge"] == "eps2" and rep["grid"]["count"] == 16 and rep["order"] == 7
    assert rep["tasks"][0]["value"]["order"] == pytest.approx(1)
    assert not (tmp_path / "out" / "traces").exists()


def test_single_task_commands(tmp_path, capsys):
    out = ["--out", str(tmp_path / "o")]
    assert cli.main(["classify", "eps^-1 * sin(eps^-1)", "--expect", "none-of-three", *out]) == 0
    assert cli.main(["verify", "rho^2", "lt", "rho", *out]) == 0
    assert cli.main(["verify", "rho", "lt", "rho^2", *out]) == 1
    assert cli.main(["limit", "h * rho^-1", *out]) == 0
    assert cli.main(["embed", "delta", "--at", "1", *out]) == 0
    assert "PASS" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ghf", "verify", "0", "leq", "rho", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("PASS")
