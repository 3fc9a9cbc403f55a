import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import AUGMENTED_DESIGN
from test_diagnostics import FIXTURE_BIAS, fixture_design
from treatreg.cli import main
from treatreg.data import DataTable
from treatreg.estimators import summarize
from treatreg.samplers import MCMCConfig, fit_reparam
from treatreg.simbench import VardecScenario

FAST = ["--draws", "150", "--burn-in", "50"]


def dump(tmp_path, y, z, X, name="d.csv"):
    cols = {"y": y, "z": z}
    cols.update({f"x{j}": X[:, j] for j in range(X.shape[1])})
    path = tmp_path / name
    DataTable.from_dict(cols).to_csv(path)
    return str(path)


def parse_diag(out):
    rows = {}
    for line in out.splitlines()[1:]:
        name, val = line.split()
        rows[name] = float(val)
    return rows


# --- simulate ---------------------------------------------------------------------

def test_simulate_vardec(tmp_path, capsys):
    out = str(tmp_path / "vd")
    code = main(["simulate", "--scenario", "vardec", "--n", "100", "--p", "30", "--k", "3", "--kappa2", "0.05",
                 "--phi2", "0.7", "--rho2", "0.9", "--reps", "2", "--seed", "7", "--out", out, *FAST])
    assert code == 0
    doc = json.loads((tmp_path / "vd.json").read_text())
    assert [r["key"] for r in doc["rows"]] == ["new", "ols", "naive", "oracle"]
    assert doc["scenario"]["rho2"] == 0.9 and doc["replications"] == 2
    assert len((tmp_path / "vd.csv").read_text().splitlines()) == 5
    assert "Oracle OLS" in capsys.readouterr().out


def test_simulate_pgtn(tmp_path):
    out = str(tmp_path / "pg")
    assert main(["simulate", "--scenario", "pgtn", "--pmax", "3", "--reps", "2", "--out", out, *FAST]) == 0
    doc = json.loads((tmp_path / "pg.json").read_text())
    assert [r["method"] for r in doc["rows"]] == ["New Approach", "Naive Regularization"]
    assert [r["key"] for r in doc["rows"]] == ["new-gprior", "naive-gprior"]


def test_simulate_errors(tmp_path, capsys):
    base = ["simulate", "--scenario", "vardec", "--kappa2", "0.05", "--phi2", "0.7", "--reps", "1",
            "--out", str(tmp_path / "x")]
    assert main(base) == 2
    assert "--rho2" in capsys.readouterr().err
    assert main(base + ["--rho2", "0.5", "--k", "11"]) == 2
    assert main(["simulate", "--scenario", "pgtn", "--methods", "new", "--reps", "1", *FAST]) == 3
    assert main(["simulate", "--scenario", "wang1", "--methods", "magic", "--reps", "1"]) == 2
    with pytest.raises(SystemExit):
        main(["simulate", "--scenario", "nope"])


# --- fit --------------------------------------------------------------------------

def test_fit_round_trip_matches_in_memory(tmp_path, capsys):
    ds = VardecScenario(n=100, p=30, k=3, kappa2=0.05, phi2=0.7, rho2=0.5).generate(np.random.default_rng(3))
    d = ds.data
    path = dump(tmp_path, d.y, d.z, d.X)
    out = tmp_path / "s.json"
    chains = tmp_path / "c.csv"
    code = main(["fit", "--data", path, "--method", "new", "--seed", "9", "--out", str(out),
                 "--chains", str(chains), "--draws", "400", "--burn-in", "100"])
    assert code == 0
    assert capsys.readouterr().out.startswith("n=100 p=30 method=new")
    doc = json.loads(out.read_text())
    ref = summarize(fit_reparam(d, MCMCConfig(burn_in=100, n_draws=400, seed=9)))
    assert doc["estimate"] == ref.estimate
    assert (doc["2.5%"], doc["97.5%"]) == (ref.lower, ref.upper)
    header = chains.read_text().splitlines()[0].split(",")
    assert header[0] == "alpha" and "beta_c[29]" in header
    # second run is identical
    main(["fit", "--data", path, "--method", "new", "--seed", "9", "--out", str(tmp_path / "t.json"),
          "--draws", "400", "--burn-in", "100"])
    assert json.loads((tmp_path / "t.json").read_text()) == doc


def test_fit_augmented_panel_header(tmp_path, panel, capsys):
    data = tmp_path / "panel.csv"
    panel.to_csv(data)
    design = tmp_path / "design.json"
    design.write_text(json.dumps(AUGMENTED_DESIGN))
    code = main(["fit", "--data", str(data), "--design", str(design), "--method", "new",
                 "--draws", "30", "--burn-in", "10"])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "n=624 p=176 method=new"


def test_fit_errors(tmp_path, capsys):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 2))
    dup = dump(tmp_path, rng.normal(size=20), rng.normal(size=20), np.column_stack([X, X[:, 1]]))
    assert main(["fit", "--data", dup, "--method", "ols"]) == 3
    assert "rank-deficient" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("y,z,x0\n1,2,3\n4,5\n")
    assert main(["fit", "--data", str(bad), "--method", "ols"]) == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv")]) == 2
    wide = dump(tmp_path, rng.normal(size=5), rng.normal(size=5), rng.normal(size=(5, 6)), "wide.csv")
    assert main(["fit", "--data", wide, "--method", "new", *FAST]) == 3


def test_fit_standardize_flag(tmp_path, capsys):
    rng = np.random.default_rng(1)
    X = rng.normal(loc=5, size=(50, 2))
    z = X[:, 0] + rng.normal(size=50) + 3
    y = 0.5 * z + X[:, 1] + rng.normal(size=50) + 10
    path = dump(tmp_path, y, z, X)
    assert main(["fit", "--data", path, "--method", "ols", "--standardize"]) == 0
    doc = json.loads(capsys.readouterr().out.split("\n", 1)[1])
    W = np.column_stack([np.ones(50), z, X])
    assert doc["estimate"] == pytest.approx(np.linalg.lstsq(W, y, rcond=None)[0][1], rel=1e-10)


# --- diagnose ----------------------------------------------------------------------

def write_coef(tmp_path, **kw):
    path = tmp_path / "coef.json"
    path.write_text(json.dumps({k: np.asarray(v).tolist() for k, v in kw.items()}))
    return str(path)


def test_diagnose_fixture(tmp_path, capsys):
    z, X, beta = fixture_design()
    path = dump(tmp_path, np.zeros(20) + np.arange(20.0), z, X)
    assert main(["diagnose", "--data", path, "--coef", write_coef(tmp_path, beta=beta)]) == 0
    rows = parse_diag(capsys.readouterr().out)
    assert rows["ridge_alpha_bias"] == pytest.approx(FIXTURE_BIAS, rel=1e-10)


def test_diagnose_zero_and_orthogonal(tmp_path, capsys):
    z, X, _ = fixture_design()
    y = np.arange(20.0)
    path = dump(tmp_path, y, z, X)
    coef = write_coef(tmp_path, alpha=0.5, beta_c=np.zeros(3), beta_d=np.zeros(3))
    assert main(["diagnose", "--data", path, "--coef", coef]) == 0
    rows = parse_diag(capsys.readouterr().out)
    assert rows["ridge_alpha_bias"] == 0 and rows["reparam_alpha_bias"] == 0
    Xo = X - np.outer(z, z @ X) / (z @ z)
    path = dump(tmp_path, y, z, Xo, "orth.csv")
    assert main(["diagnose", "--data", path, "--coef", write_coef(tmp_path, beta=[1.0, 2.0, 3.0])]) == 0
    assert abs(parse_diag(capsys.readouterr().out)["ridge_alpha_bias"]) < 1e-12


def test_diagnose_errors(tmp_path):
    z, X, _ = fixture_design()
    path = dump(tmp_path, z, z, X)
    assert main(["diagnose", "--data", path, "--coef", write_coef(tmp_path, beta=[1.0, 2.0])]) == 2
    assert main(["diagnose", "--data", path, "--coef", write_coef(tmp_path, alpha=1.0)]) == 2
    assert main(["diagnose", "--data", path, "--coef", str(tmp_path / "none.json")]) == 2


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "treatreg.cli", "simulate", "--scenario", "vardec",
                          "--kappa2", "0.05", "--phi2", "0.7"], capture_output=True, text=True)
    assert res.returncode == 2
    assert "error:" in res.stderr
