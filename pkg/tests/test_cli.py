import csv
import json

import numpy as np
import pytest

from nonlocal_eikonal.cli import dispatch
from nonlocal_eikonal.diagnostics import CSV_COLUMNS
from nonlocal_eikonal.output import SNAPSHOT_HEADER, dumps, write_atomic

SMALL = {"domain": {"P": 10, "N": 40}, "smoothing": {"M": 20},
         "time": {"dt": 0.01, "T": 0.2}, "solver": {"cfl_mode": "off"},
         "output": {"every_k_steps": 5, "dir": "sim"}}


def write_cfg(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_kernel_inspect(tmp_path):
    assert dispatch(["kernel-inspect", "--P", "10", "--M", "16", "--N", "64", "--out", "k"]) == 0
    report = json.loads((tmp_path / "k" / "kernel.json").read_text())
    assert set(report) == {"P", "M", "N", "mode", "coeffs", "samples", "l1_discrete",
                           "max_coeff", "tail_integral"}
    assert len(report["coeffs"]) == 31 and len(report["samples"]) == 128
    assert report["max_coeff"] <= 1e-12
    rows = read_csv(tmp_path / "k" / "kernel_samples.csv")
    assert rows[0] == ["x_j", "sigma_j"] and len(rows) == 129


def test_kernel_inspect_surfaces_tail_error():
    assert dispatch(["kernel-inspect", "--P", "1", "--M", "4", "--N", "8", "--zeta", "2"]) == 2


def test_bad_config_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, {"domain": {"N": 5}, "bogus": 1})
    assert dispatch(["simulate", "--config", path]) == 2
    err = capsys.readouterr().err
    assert "bogus: unknown key" in err and "domain.N: N >= M required" in err


def test_missing_config_file(tmp_path):
    assert dispatch(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_usage_error_is_config_error():
    assert dispatch(["simulate"]) == 2


def test_simulate_outputs(tmp_path):
    assert dispatch(["--seed", "7", "simulate", "--config", write_cfg(tmp_path, SMALL)]) == 0
    out = tmp_path / "sim"
    snaps = sorted(p.name for p in out.glob("snapshot_*.csv"))
    assert snaps == [f"snapshot_{n:08d}.csv" for n in (0, 5, 10, 15, 20)]
    rows = read_csv(out / snaps[-1])
    assert tuple(rows[0]) == SNAPSHOT_HEADER and len(rows) == 81
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["domain"]["N"] == 40 and manifest["seed"] == 7
    assert manifest["derived"]["kernel_l1"] == 2.0
    with np.load(out / "final_state.npz") as data:
        assert int(data["n"]) == 20
    assert not list(out.glob("*.tmp"))


def test_strict_cfl_violation_is_config_error(tmp_path):
    doc = dict(SMALL, solver={"cfl_mode": "strict_paper"})
    assert dispatch(["simulate", "--config", write_cfg(tmp_path, doc)]) == 2


def test_entropy_report(tmp_path):
    doc = dict(SMALL, output={"every_k_steps": 5, "dir": "ent"})
    assert dispatch(["entropy-report", "--config", write_cfg(tmp_path, doc)]) == 0
    rows = read_csv(tmp_path / "ent" / "entropy_report.csv")
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 22
    manifest = json.loads((tmp_path / "ent" / "manifest.json").read_text())
    assert manifest["n_violations"] == 0


def test_fixed_point_failure_exit_code(tmp_path):
    doc = dict(SMALL, solver={"cfl_mode": "off", "max_iter": 1})
    assert dispatch(["simulate", "--config", write_cfg(tmp_path, doc)]) == 1


def test_write_atomic_leaves_no_partial_file(tmp_path):
    target = tmp_path / "x.json"
    with pytest.raises(TypeError):
        write_atomic(target, object())
    assert not target.exists() and not list(tmp_path.glob(".x.json.*"))


def test_json_floats_roundtrip():
    vals = [0.1, 1 / 3, 2.0 ** -1074, 1e308]
    assert json.loads(dumps(vals)) == vals
    assert json.loads(dumps(np.array(vals))) == vals
