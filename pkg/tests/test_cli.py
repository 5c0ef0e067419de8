import csv
import io
import json

import pytest

from permadde import TimeFunction, preset
from permadde.cli import main, set_param
from permadde.errors import BadParamPath
from permadde.serialize import model_to_dict, save_model

NICHOLSON = "preset:nicholson?d=1&beta=sin:2:0.5:1"
QUAD = "preset:bastinec-quadratic?alpha=sin:2:1:1&beta=1"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_stdout(capsys):
    code, out, _ = run(capsys, "simulate", "--preset", QUAD, "--T", "20", "--h", "0.05")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "x"]
    assert float(rows[-1][0]) == pytest.approx(20.0)


def test_simulate_with_f_to_file(capsys, tmp_path):
    path = tmp_path / "x.csv"
    code, out, _ = run(capsys, "simulate", "--preset", QUAD, "--T", "20", "--with-f",
                       "--out", str(path))
    assert code == 0 and out == ""
    assert path.read_text().splitlines()[0] == "t,x,f"


def test_simulate_model_file(capsys, tmp_path, bh_constant):
    path = tmp_path / "m.json"
    save_model(bh_constant, path)
    code, out, _ = run(capsys, "simulate", "--model", str(path), "--T", "20")
    assert code == 0
    assert float(out.splitlines()[-1].split(",")[1]) == 1.0


def test_bounds_json(capsys):
    code, out, _ = run(capsys, "bounds", "--preset", NICHOLSON)
    assert code == 0
    doc = json.loads(out)
    assert doc["family"] == "nicholson" and doc["permanent"]
    assert [h["name"] for h in doc["hypotheses"]][:2] == ["birth-exceeds-death",
                                                         "birth-below-e-death"]


def test_bounds_not_certified(capsys):
    code, out, _ = run(capsys, "bounds", "--preset", "preset:bh-logistic?alpha=1&mu=2")
    assert code == 2
    assert json.loads(out)["K_l"] == 0.0


def test_verify_permanence(capsys):
    code, out, _ = run(capsys, "verify", "--preset", QUAD, "--N", "4", "--seed", "3",
                       "--T", "100", "--envelopes")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] and doc["sandwich"]["pass"]
    assert len(doc["per_trajectory"]) == 4


def test_verify_extinction(capsys):
    code, out, _ = run(capsys, "verify", "--preset", "preset:bh-logistic?alpha=1&mu=2",
                       "--N", "3")
    doc = json.loads(out)
    assert code == 0 and doc["mode"] == "extinction"


def test_verify_uncertified(capsys):
    code, _, err = run(capsys, "verify", "--preset",
                       "preset:bastinec-constant?alpha=1&beta=1&r=sin:1:1:1")
    assert code == 2 and "not certified" in err


def test_verify_with_bounds_file(capsys, tmp_path):
    code, out, _ = run(capsys, "bounds", "--preset", QUAD)
    path = tmp_path / "b.json"
    path.write_text(out)
    code, out, _ = run(capsys, "verify", "--preset", QUAD, "--bounds", str(path),
                       "--N", "2", "--T", "100")
    assert code == 0


def test_verify_is_deterministic(capsys):
    args = ("verify", "--preset", NICHOLSON, "--N", "3", "--seed", "11", "--T", "80")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b


def test_sweep_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--preset", "preset:nicholson?d=1&beta=2",
                       "--param", "recruitment.0.alpha", "--range", "0.5:3.5:4",
                       "--T", "60", "--workers", "2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["permanent"] for r in rows] == ["0", "1", "1", "0"]


def test_bad_preset_exit_code(capsys):
    code, _, err = run(capsys, "bounds", "--preset", "preset:unknown")
    assert code == 1 and err.startswith("permadde:")


def test_bad_json_exit_code(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{")
    assert run(capsys, "bounds", "--model", str(path))[0] == 1


def test_missing_file_exit_code(capsys, tmp_path):
    assert run(capsys, "bounds", "--model", str(tmp_path / "nope.json"))[0] == 1


def test_usage_error_exit_code(capsys):
    assert run(capsys, "simulate")[0] == 1


def test_solver_failure_exit_code(capsys):
    code, _, _ = run(capsys, "simulate", "--preset",
                     "preset:bastinec-quadratic?alpha=1e-4&beta=1", "--history", "10",
                     "--h", "0.5", "--T", "20")
    assert code == 3


def test_set_param_time_function(bh_constant):
    doc = set_param(model_to_dict(bh_constant), "mortality.mu", 0.5)
    assert doc["mortality"]["mu"] == {"kind": "constant", "params": [0.5]}


def test_set_param_inside_params():
    m = preset("nicholson", {"d": 1.0, "beta": TimeFunction.sinusoid(2, 0.5, 1, 0)})
    doc = set_param(model_to_dict(m), "recruitment.0.alpha.params.0", 3.0)
    alpha = doc["recruitment"][0]["alpha"]
    assert alpha["params"][0] == 3.0 and "sup" not in alpha


def test_set_param_bad_path(bh_constant):
    with pytest.raises(BadParamPath):
        set_param(model_to_dict(bh_constant), "mortality.nu", 1.0)
    with pytest.raises(BadParamPath):
        set_param(model_to_dict(bh_constant), "recruitment", 1.0)

