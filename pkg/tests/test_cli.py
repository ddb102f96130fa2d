import csv
import json

import numpy as np
import pytest

from latfkg.cli import dispatch, main, sha256

SOLVE = {
    "n": 1, "N": 32, "hbar": 0.2, "alpha": 0.5, "T": 1.0, "dt": 1 / 64,
    "mass": {"bump": [1.0, 1.0, 1.0]},
    "u0": {"builtin": "random", "amplitude": 0.5},
    "u1": {"builtin": "gaussian", "width": 1.0},
}


def read_csv(path):
    with open(path) as fh:
        return [row for row in csv.reader(fh) if row and not row[0].startswith("#")]


def test_coeffs_integer_order(tmp_path):
    assert main(["coeffs", "--alpha", "1", "--radius", "3", "--out-dir", str(tmp_path), "--assert"]) == 0
    rows = read_csv(tmp_path / "coeffs.csv")
    assert rows[0] == ["j_0", "a_j", "quad_err"]
    weights = [float(r[1]) for r in rows[1:]]
    np.testing.assert_allclose(weights, [0, 0, -1, 2, -1, 0, 0], atol=1e-12)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["quad_points"] == 4096
    assert manifest["outputs"]["coeffs.csv"] == sha256(tmp_path / "coeffs.csv")


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert dispatch("solve", dict(SOLVE), a, seed=7, check=True) == 0
    assert dispatch("solve", dict(SOLVE), b, seed=7, check=True) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"]
    for name in ma["outputs"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert dispatch("solve", dict(SOLVE), tmp_path / "c", seed=8) == 0
    mc = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert mc["outputs"] != ma["outputs"]


def test_solve_with_forcing_file(tmp_path):
    forcing = tmp_path / "f.csv"
    lines = ["t,index_0,re,im"]
    for t in np.linspace(0, 1, 5):
        for i in range(-16, 16):
            lines.append(f"{float(t)!r},{i},{float(np.sin(t) * np.exp(-(0.2 * i) ** 2))!r},0")
    forcing.write_text("\n".join(lines) + "\n")
    cfg = dict(SOLVE, forcing={"file": str(forcing)})
    assert dispatch("solve", cfg, tmp_path / "out", check=True) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert str(forcing) in manifest["inputs"]


def test_bad_input_files_are_config_errors(tmp_path, capsys):
    cfg = dict(SOLVE, u0={"file": str(tmp_path / "missing.csv")})
    assert dispatch("solve", cfg, tmp_path / "o1") == 2
    bad = tmp_path / "f.csv"
    bad.write_text("t,index_0,re,im\n0.0,0,oops,0\n")
    assert dispatch("solve", dict(SOLVE, forcing={"file": str(bad)}), tmp_path / "o2") == 2
    err = capsys.readouterr().err
    assert "missing.csv" in err and "forcing.file: line 2" in err


def test_validation_errors_name_fields(tmp_path, capsys):
    assert main(["coeffs", "--alpha", "1.5", "--out-dir", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err
    bad = dict(SOLVE, N=31, extra_key=1)
    assert dispatch("solve", bad, tmp_path / "bad") == 2
    err = capsys.readouterr().err
    assert "N:" in err and "extra_key" in err
    assert not (tmp_path / "bad").exists()


def test_nyquist_reported_as_config_error(tmp_path, capsys):
    cfg = {"alpha": 0.5, "hbar_list": [0.8, 0.4, 0.2], "box": 64.0,
           "profile": {"kind": "gaussian", "cutoff": 1.25, "width": 0.075}}
    assert dispatch("converge", cfg, tmp_path) == 2
    assert "Nyquist" in capsys.readouterr().err


def test_output_outside_dir_rejected(tmp_path):
    out = tmp_path / "out"
    assert main(["coeffs", "--alpha", "0.5", "--out-dir", str(out), "--out", "../escape.csv"]) == 2
    assert not (tmp_path / "escape.csv").exists()


def test_symbol_gap_assert(tmp_path):
    assert main(["symbol-gap", "--alpha", "1", "--hbar", "0.1", "--n", "1", "--N", "20",
                 "--out-dir", str(tmp_path), "--assert"]) == 0
    rows = read_csv(tmp_path / "symbol_gap.csv")
    assert rows[0][-2:] == ["gap", "normalized"] and len(rows) == 21


def test_converge_assert(tmp_path):
    cfg = {"alpha": 0.5, "hbar_list": [0.4, 0.2, 0.1, 0.05], "box": 64.0,
           "profile": {"kind": "gaussian", "cutoff": 1.25, "width": 0.075, "center": 0.625}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["converge", "--config", str(path), "--out-dir", str(tmp_path / "o"), "--assert"]) == 0
    text = (tmp_path / "o" / "converge.csv").read_text()
    assert "# fitted_rate=" in text


def test_energy_plane_wave(tmp_path):
    cfg = {"n": 1, "N": 16, "hbar": 0.1, "alpha": 1.0, "mass": {"const": 0.0},
           "u0": {"builtin": "planewave", "mode": [3]}, "u1": {"builtin": "zero"}}
    assert dispatch("energy", cfg, tmp_path) == 0
    rows = read_csv(tmp_path / "energy.csv")
    record = dict(zip(rows[0], rows[1]))
    assert float(record["dirichlet"]) == pytest.approx(16 * 4 * np.sin(np.pi * 3 / 16) ** 2 / 0.01)
