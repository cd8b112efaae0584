import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from adhesion.cli import main, run_scenario
from adhesion.config import ConfigError, dump_config, load_config, parse_config

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

BASE = {
    "kind": "HopfLax1D",
    "potential": {"fourier": [{"k": 1, "cos": 1.0}]},
    "time": {"t0": 0.0, "T": 0.5, "step": 0.01},
    "particles": [0.5, 1.0],
    "outputs": [{"kind": "csv"}, {"kind": "report"}],
}


def _with(path, value):
    data = json.loads(json.dumps(BASE))
    node = data
    *head, last = path
    for key in head:
        node = node[key]
    if value is KeyError:
        del node[last]
    else:
        node[last] = value
    return data


@pytest.mark.parametrize("path,value,where", [
    (("kind",), "Nope", "kind"),
    (("time", "step"), 0.0, "time.step"),
    (("time", "T"), -1.0, "time.T"),
    (("time", "step"), KeyError, "time.step"),
    (("potential", "fourier"), [{"k": 0}], "potential.fourier[0].k"),
    (("potential", "bogus"), 1, "potential.bogus"),
    (("particles",), [[1.0, 2.0]], "particles[0]"),
    (("outputs",), [{"kind": "svg", "times": [1.0]}], "outputs"),
    (("nu_list",), [0.1, 0.05], "nu_list"),
])
def test_config_errors_name_the_field(path, value, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(_with(path, value))
    assert exc.value.path.startswith(where)


def test_convergence_study_nu_list_must_decrease():
    data = _with(("kind",), "ConvergenceStudy")
    data["nu_list"] = [0.1, 0.2]
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert exc.value.path == "nu_list[1]"


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path):
    cfg = load_config(path)
    assert parse_config(yaml.safe_load(dump_config(cfg))) == cfg


def _run(tmp_path, data, name="s"):
    cfg_path = tmp_path / f"{name}.yaml"
    cfg_path.write_text(yaml.safe_dump(data))
    out = tmp_path / f"out-{name}"
    return main(["run", str(cfg_path), "--out", str(out)]), out


def test_run_writes_manifest_and_csv(tmp_path):
    code, out = _run(tmp_path, BASE)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    names = [f["name"] for f in manifest["files"]]
    assert names == ["report.json", "trajectories.csv"]
    for f in manifest["files"]:
        data = (out / f["name"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    lines = (out / "trajectories.csv").read_text().splitlines()
    assert lines[0].startswith("# adhesion trajectories v1")
    rows = list(csv.DictReader(lines[1:]))
    assert list(rows[0]) == ["t", "particle_id", "x0", "v0", "on_shock"]
    assert len(rows) == 2 * 51
    first = [r for r in rows if r["particle_id"] == "0"]
    assert float(first[-1]["x0"]) == pytest.approx(0.5 - 0.5 * math.sin(0.5), abs=5e-3)


def test_run_is_bit_deterministic(tmp_path):
    _, a = _run(tmp_path, BASE, "a")
    _, b = _run(tmp_path, BASE, "b")
    for name in ("trajectories.csv", "report.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_zero_potential_particles_do_not_move(tmp_path):
    data = _with(("potential",), {"fourier": []})
    code, out = _run(tmp_path, data)
    assert code == 0
    rows = list(csv.DictReader((out / "trajectories.csv").read_text().splitlines()[1:]))
    assert {r["v0"] for r in rows} == {"0.0"}
    assert {(r["particle_id"], r["x0"]) for r in rows} == {("0", "0.5"), ("1", "1.0")}


def test_config_error_exit_code(tmp_path):
    code, _ = _run(tmp_path, _with(("time", "step"), -1.0))
    assert code == 2


def test_bad_step_override_exit_code(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(BASE))
    assert main(["run", str(p), "--out", str(tmp_path / "o"), "--step", "0"]) == 2


def test_invariant_failure_exit_code(tmp_path):
    # a tangent condition violated by construction
    data = yaml.safe_load((SCENARIOS / "a3_endpoint.yaml").read_text())
    data["potential"]["beta"] = [-b for b in data["potential"]["beta"]]
    data["outputs"] = [{"kind": "report"}]
    code, out = _run(tmp_path, data)
    assert code == 1
    assert json.loads((out / "report.json").read_text())["violations"]


def test_local_model_svg_and_events(tmp_path):
    code, out = _run(tmp_path, yaml.safe_load((SCENARIOS / "narrow_transition.yaml").read_text()))
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["configuration"]["class"] in ("Narrow", "Wide", "TotallyObtuse")
    assert all(e["kind"] in ("Birth", "Release", "Merge", "PassThrough") for e in rep["events"])


def test_svg_output(tmp_path):
    code, out = _run(tmp_path, yaml.safe_load((SCENARIOS / "acute_node.yaml").read_text()))
    assert code == 0
    assert (out / "shock_1.0.svg").read_text().startswith("<?xml")


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "a3", "--seed", "1", "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["passed"] and rep["seed"] == 1
    assert main(["verify", "a3", "--seed", "1", "--tol", "1e-30"]) == 1
    assert json.loads(capsys.readouterr().out)["counterexamples"]
