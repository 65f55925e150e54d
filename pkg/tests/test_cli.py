import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import transposition_choi
from freepos.cli import ConfigError, execute, main, validate_params, validate_run_config
from freepos.fileio import write_csv, write_fprm
from freepos.rmt import BipartiteOperator


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    result = json.loads(out.out) if out.out.strip() else None
    return code, result, out.err


# ---- threshold --------------------------------------------------------------

@pytest.mark.parametrize("argv,max_k", [
    (["--family", "semicircle", "--a", 1, "--sigma", 1, "--n", 8], 2),
    (["--family", "mp", "--a", 0.6, "--t", 0.25, "--n", 4], 2),
    (["--family", "semicircle", "--a", 0, "--sigma", 1, "--n", 4], 0),
])
def test_threshold(capsys, tmp_path, argv, max_k):
    code, res, _ = run(capsys, "threshold", *argv, "--out", tmp_path)
    assert code == 0
    assert res["max_k"] == max_k
    assert len(res["table"]) == argv[-1]
    assert (tmp_path / "manifest.json").exists()


def test_threshold_small_rank(capsys, tmp_path):
    code, res, _ = run(capsys, "threshold", "--family", "small-rank", "--a", 1.5, "--eps", 1e-6,
                       "--n", 4, "--out", tmp_path)
    assert code == 0
    statuses = [row["status"] for row in res["table"]]
    assert statuses[:2] == ["k_positive", "k_positive"]
    assert statuses[2] == "not_k_positive"


# ---- freeconv ---------------------------------------------------------------

def test_freeconv_semicircle(capsys, tmp_path):
    spec = json.dumps({"family": "semicircle", "a": 1, "sigma": 1})
    code, res, _ = run(capsys, "freeconv", "--spec", spec, "--T", 4, "--out", tmp_path)
    assert code == 0
    assert (res["support"]["min"], res["support"]["max"]) == (0.0, 8.0)
    assert (tmp_path / "freeconv_support.svg").exists()
    assert (tmp_path / "freeconv_support.csv").exists()


def test_freeconv_atomic_with_oracle(capsys, tmp_path):
    spec = tmp_path / "bern.json"
    spec.write_text(json.dumps({"family": "atomic", "atoms": [[0.5, -1], [0.5, 1]]}))
    code, res, _ = run(capsys, "freeconv", "--spec", f"@{spec}", "--T", 2, "--oracle", 2000, 1,
                       "--out", tmp_path / "o")
    assert code == 0
    assert res["support"]["max"] == pytest.approx(2, abs=1e-6)
    assert res["oracle"]["gap"] < 0.05


def test_freeconv_identity(capsys, tmp_path):
    spec = {"family": "free_poisson", "t": 0.3}
    code, res, _ = run(capsys, "freeconv", "--spec", json.dumps(spec), "--T", 1, "--out", tmp_path)
    assert code == 0
    assert res["result_spec"] == spec and res["input"] == spec


# ---- witness ----------------------------------------------------------------

def test_witness_outside_detection_regime(capsys, tmp_path):
    code, res, _ = run(capsys, "witness", "--n", 16, "--d", 8, "--alpha", 0.99, "--eps", 0.01,
                       "--trials", 2, "--out", tmp_path)
    assert code == 0
    assert res["aggregates"]["detection_rate"] == 0
    assert res["theory"]["detection_expected"] is False
    rows = list(csv.DictReader(open(tmp_path / "witness_spectra.csv")))
    assert {r["kind"] for r in rows} == {"Z", "PTZ", "C"}
    assert len(rows) == 2 * 3 * 128
    assert (tmp_path / "witness_by_trial.csv").exists()


def test_witness_alpha_zero(capsys, tmp_path):
    code, res, _ = run(capsys, "witness", "--n", 4, "--d", 40, "--alpha", 0, "--eps", 0.5,
                       "--trials", 3, "--no-spectra", "--out", tmp_path)
    assert code == 0
    assert res["aggregates"]["witness"]["mean"] == pytest.approx(2 * 2.5 * 2, abs=0.2)
    assert not (tmp_path / "witness_spectra.csv").exists()


def test_witness_regime_inconsistent_exit(capsys, tmp_path):
    # detection is expected in the limit but d=2 is far too small for it
    code, res, _ = run(capsys, "witness", "--n", 25, "--d", 2, "--alpha", 0.9, "--eps", 0.1,
                       "--trials", 2, "--no-spectra", "--out", tmp_path)
    assert res["regime_consistent"] is (code == 0)
    assert code in (0, 3)


def test_witness_certify_guard(capsys, tmp_path):
    code, _, err = run(capsys, "witness", "--n", 25, "--d", 4, "--alpha", 0.3, "--eps", 0.1,
                       "--certify", "--out", tmp_path)
    assert code == 2 and "regime" in err


# ---- separability -----------------------------------------------------------

def test_separability_analytic(capsys, tmp_path):
    code, res, _ = run(capsys, "separability", "--n", 25, "--analytic-only", "--out", tmp_path)
    assert code == 0
    assert res["threshold"]["alpha_star"] == pytest.approx(5 / 53)
    code, res, _ = run(capsys, "separability", "--n", 10000, "--analytic-only", "--out", tmp_path)
    assert res["threshold"]["ball_ratio"] == pytest.approx(4 * (100 + 2 * 9999) / 1e4)


def test_separability_trials(capsys, tmp_path):
    code, res, _ = run(capsys, "separability", "--n", 3, "--d", 5, "--beta", 0.5, "--alpha", 0.5,
                       "--trials", 2, "--out", tmp_path)
    assert code == 0 and res["x"] == 4
    assert all(t["reassembly_residual"] < 1e-10 for t in res["trials"])
    rows = list(csv.DictReader(open(tmp_path / "separability_components.csv")))
    assert len(rows) == 2 * (4 * 3 + 3)


# ---- kpos -------------------------------------------------------------------

def test_kpos_identity(capsys, tmp_path):
    path = tmp_path / "eye.csv"
    write_csv(path, BipartiteOperator(2, 3, np.eye(6)))
    code, res, _ = run(capsys, "kpos", "--matrix", path, "--n", 2, "--d", 3, "--k", 2,
                       "--restarts", 2, "--out", tmp_path / "o")
    assert code == 0
    assert res["see_saw"]["status"] == "no_violation_found"
    assert res["see_saw"]["best_value"] == pytest.approx(1)


def test_kpos_transposition(capsys, tmp_path):
    path = tmp_path / "swap.fprm"
    write_fprm(path, transposition_choi(2))
    code, res, _ = run(capsys, "kpos", "--matrix", path, "--k", 2, "--restarts", 2,
                       "--out", tmp_path / "o")
    assert res["see_saw"]["status"] == "negative_certificate"
    assert res["see_saw"]["best_value"] == pytest.approx(-1, abs=1e-9)
    code, res, _ = run(capsys, "kpos", "--matrix", path, "--k", 1, "--restarts", 2, "--net", 16,
                       "--out", tmp_path / "o1")
    assert res["net"]["best_value"] >= -1e-12
    assert res["see_saw"]["status"] == "no_violation_found"


def test_kpos_errors(capsys, tmp_path):
    code, _, err = run(capsys, "kpos", "--matrix", tmp_path / "missing.fprm", "--k", 1,
                       "--out", tmp_path)
    assert code == 2
    bad = tmp_path / "nan.csv"
    rows = ["row,col,re,im"] + [f"{r},{c},{'nan' if r == c == 0 else 0.0},0.0"
                                for r in range(4) for c in range(4)]
    bad.write_text("\n".join(rows) + "\n")
    code, _, err = run(capsys, "kpos", "--matrix", bad, "--n", 2, "--d", 2, "--k", 1,
                       "--out", tmp_path)
    assert code == 4 and "numerical" in err


# ---- spectrum ---------------------------------------------------------------

def test_spectrum_gue(capsys, tmp_path):
    code, res, _ = run(capsys, "spectrum", "--ensemble", "gue", "--d", 1000, "--out", tmp_path)
    assert code == 0
    assert res["kolmogorov_distance"] < 0.05
    assert 1.85 <= res["norm"] <= 2.15
    rows = list(csv.reader(open(tmp_path / "eigenvalues.csv")))
    assert rows[0] == ["index", "eigenvalue"] and len(rows) == 1001


def test_spectrum_block_gue(capsys, tmp_path):
    code, res, _ = run(capsys, "spectrum", "--ensemble", "block-gue", "--n", 3, "--d", 300,
                       "--out", tmp_path)
    assert code == 0 and res["kolmogorov_distance"] < 0.05


def test_spectrum_atomic_diag(capsys, tmp_path):
    spec = json.dumps({"family": "atomic", "atoms": [[0.25, -1], [0.75, 2]]})
    code, res, _ = run(capsys, "spectrum", "--ensemble", "diag", "--spec", spec, "--d", 8,
                       "--out", tmp_path)
    assert code == 0 and res["kolmogorov_distance"] == 0
    values = [float(r["eigenvalue"]) for r in csv.DictReader(open(tmp_path / "eigenvalues.csv"))]
    assert values == [-1, -1, 2, 2, 2, 2, 2, 2]


# ---- run contract -----------------------------------------------------------

def test_every_svg_has_csv_sibling(capsys, tmp_path):
    run(capsys, "spectrum", "--ensemble", "gue", "--d", 50, "--out", tmp_path / "a")
    run(capsys, "freeconv", "--spec", '{"family":"semicircle","a":0,"sigma":1}', "--T", 2,
        "--out", tmp_path / "b")
    svgs = list(tmp_path.rglob("*.svg"))
    assert svgs
    for svg in svgs:
        assert svg.with_suffix(".csv").exists()
        assert svg.read_text().startswith("<svg")


def test_manifest_rerun_is_byte_identical(capsys, tmp_path):
    run(capsys, "spectrum", "--ensemble", "block-gue", "--n", 2, "--d", 30, "--seed", 17,
        "--out", tmp_path / "first")
    manifest = json.loads((tmp_path / "first" / "manifest.json").read_text())
    assert manifest["seed"] == 17 and manifest["library_version"]
    code, _, _ = run(capsys, "rerun-from-manifest", tmp_path / "first" / "manifest.json",
                     "--out", tmp_path / "second")
    assert code == 0
    for name in ("eigenvalues.csv", "histogram.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_emit_subset(capsys, tmp_path):
    run(capsys, "spectrum", "--ensemble", "gue", "--d", 20, "--emit", "json", "--out", tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json", "spectrum.json"]
    code, _, _ = run(capsys, "spectrum", "--ensemble", "gue", "--d", 20, "--emit", "pdf",
                     "--out", tmp_path)
    assert code == 2


def test_config_file_and_errors(capsys, tmp_path):
    good = tmp_path / "cfg.json"
    good.write_text(json.dumps({"family": "semicircle", "a": 1, "sigma": 1, "n": 8}))
    code, res, _ = run(capsys, "threshold", "--config", good, "--out", tmp_path / "o")
    assert code == 0 and res["max_k"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"family": "semicircle", "a": 1, "sigma": 1, "n": 8, "zeta": 3}))
    code, _, err = run(capsys, "threshold", "--config", bad, "--out", tmp_path / "o")
    assert code == 2 and "zeta" in err
    broken = tmp_path / "broken.json"
    broken.write_text('{"family": "semicircle",\n')
    code, _, err = run(capsys, "threshold", "--config", broken, "--out", tmp_path / "o")
    assert code == 2 and "line" in err
    code, _, err = run(capsys, "freeconv", "--spec", '{"family":"semicircle","a":0}', "--T", 2,
                       "--out", tmp_path / "o")
    assert code == 2 and "sigma" in err


def test_validation_helpers():
    with pytest.raises(ConfigError):
        validate_params("threshold", {"family": "semicircle", "a": 1, "sigma": 1, "n": "x"})
    with pytest.raises(ConfigError):
        validate_run_config({"command": "threshold", "params": {}, "bogus": 1})
    with pytest.raises(ConfigError):
        validate_run_config({"command": "nonsense", "params": {}})


def test_execute_api(tmp_path):
    result, code = execute("separability", {"n": 25, "analytic_only": True}, 0, tmp_path, ["json"])
    assert code == 0 and result["threshold"]["x_star"] == pytest.approx(21.2)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "freepos.cli", "threshold", "--family",
                           "semicircle", "--a", "1", "--sigma", "1", "--n", "8", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["max_k"] == 2
    proc = subprocess.run([sys.executable, "-m", "freepos.cli", "threshold", "--n", "oops"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
