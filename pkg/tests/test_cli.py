import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pathbridge import cli
from pathbridge.errors import ModelError, ParseError
from pathbridge.io import dump_model, dumps, parse_model

JOBS = Path(__file__).resolve().parent.parent / "jobs"


def run(tmp_path, job, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(job))
    out = tmp_path / (name + ".out")
    code = cli.main(["--job", str(path), "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_chain_round_trip(tmp_path):
    src = JOBS / "two_state_T2.json"
    doc = parse_model(src)
    assert doc.labels == ("a", "b")
    assert dumps(dump_model(doc)) == src.read_text()


def test_quantum_round_trip():
    src = JOBS / "bitflip.json"
    doc = parse_model(src)
    assert doc.model.maps[0].tp_defect_norm() < 1e-12
    assert dump_model(parse_model(dump_model(doc))) == dump_model(doc)


def test_row_sum_error():
    doc = json.loads((JOBS / "two_state_T1.json").read_text())
    doc["transitions"][0][1] = [0.5, 0.49]
    with pytest.raises(ModelError, match="row-sum violated at row 1"):
        parse_model(doc)


def test_schema_error_pointer():
    doc = json.loads((JOBS / "two_state_T1.json").read_text())
    doc["transitions"][0][1][0] = "x"
    with pytest.raises(ParseError) as info:
        parse_model(doc)
    assert info.value.pointer == "/transitions/0/1/0"
    doc = json.loads((JOBS / "two_state_T1.json").read_text())
    del doc["version"]
    with pytest.raises(ParseError):
        parse_model(doc)


def test_mep3_job(tmp_path):
    job = json.loads((JOBS / "mep3_delta.json").read_text())
    job["model"] = str(JOBS / job["model"])
    code, rep = run(tmp_path, job)
    assert code == 0
    assert rep["solution"]["marginals"][1] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert max(rep["diagnostics"]["residuals"].values()) < 1e-10
    assert rep["tolerances"]["solver_tol"] == 1e-12


def test_mep1_prior_marginal(tmp_path):
    job = {"version": "v1", "kind": "mep1", "model": str(JOBS / "two_state_T1.json"),
           "constraints": {"p1": [0.5, 0.5]}}
    code, rep = run(tmp_path, job)
    assert code == 0 and rep["cost"] == 0
    assert np.allclose(rep["solution"]["transitions"][0], [[0.75, 0.25], [0.25, 0.75]])


def test_qreverse_job(tmp_path):
    job = json.loads((JOBS / "qreverse_bitflip.json").read_text())
    job["model"] = str(JOBS / job["model"])
    code, rep = run(tmp_path, job)
    K0, K1 = (np.array(K)[..., 0] + 1j * np.array(K)[..., 1] for K in rep["solution"]["kraus"])
    assert code == 0 and not rep["diagnostics"]["failures"]
    assert np.max(np.abs(K0 - np.diag([1, 0]))) < 1e-12
    assert np.max(np.abs(K1 - np.array([[0, 1], [0, 0]]))) < 1e-12


def test_infeasible_exit_code(tmp_path):
    model = {"version": "v1", "type": "chain", "states": ["x", "y"], "T": 2, "initial": [0.5, 0.5],
             "transitions": [[[1.0, 0.0], [0.0, 1.0]]] * 2}
    job = {"version": "v1", "kind": "mep3", "model": model, "constraints": {"p0": [1.0, 0.0], "p1": [0.0, 1.0]}}
    code, rep = run(tmp_path, job)
    assert code == 2 and rep["status"] == "infeasible" and rep["cost"] == "inf"


def test_validation_exit_code(tmp_path, capsys):
    job = {"version": "v1", "kind": "mep3", "model": str(JOBS / "two_state_T1.json"), "constraints": {"p0": [1, 0]}}
    code, rep = run(tmp_path, job)
    assert code == 1 and rep is None
    assert "p1" in capsys.readouterr().err
    code, _ = run(tmp_path, {"version": "v2", "kind": "mep1", "model": "x"})
    assert code == 1


def test_flag_overrides(tmp_path):
    job = json.loads((JOBS / "mep3_delta.json").read_text())
    job["model"] = str(JOBS / job["model"])
    path = tmp_path / "j.json"
    path.write_text(json.dumps(job))
    out = tmp_path / "r.json"
    assert cli.main(["--job", str(path), "--out", str(out), "--tol", "1e-11", "--max-iter", "500", "--seed", "3"]) == 0
    rep = json.loads(out.read_text())
    assert rep["tolerances"]["solver_tol"] == 1e-11 and rep["tolerances"]["max_iter"] == 500 and rep["seed"] == 3


@pytest.mark.parametrize("name", sorted(p.name for p in JOBS.glob("*.json")
                                        if not p.name.startswith(("two_state", "bitflip"))))
def test_shipped_jobs_deterministic(tmp_path, name):
    outs = []
    for k in range(2):
        out = tmp_path / f"{k}.json"
        assert cli.main(["--job", str(JOBS / name), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "pathbridge", "--job", str(JOBS / "enumerate.json"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["solution"]["weights"] == pytest.approx([0.375, 0.125, 0.125, 0.375])
