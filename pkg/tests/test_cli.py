import json
import math

import numpy as np
import pytest

from schatten.cli import main
from schatten.linalg import write_csv_matrix


@pytest.fixture
def ycsv(tmp_path, rng):
    A = np.zeros((12, 6))
    A[0, 0], A[1, 1] = 9.0, 4.0
    path = tmp_path / "Y.csv"
    write_csv_matrix(A + rng.standard_normal(A.shape), str(path))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_derive_abs(capsys):
    code, out, _ = run(capsys, "derive-coeffs", "--poly", "abs", "--degree", "1")
    body = json.loads(out)
    assert code == 0 and body["kind"] == "abs" and body["K"] == 1
    assert np.allclose(body["coeffs"], [2 / (3 * math.pi), 8 / (3 * math.pi)])


def test_derive_plans_and_reuse(capsys, tmp_path, ycsv):
    cache = str(tmp_path / "plans.json")
    code, out, _ = run(capsys, "derive-coeffs", "--k", "3", "--out", cache, "--verify")
    assert code == 0 and json.loads(out)["unbiased"]
    code, out, _ = run(capsys, "estimate", "--input", ycsv, "--method", "even", "--k", "3", "--coeffs", cache)
    rep = json.loads(out)
    assert code == 0 and rep["estimator"] == "even" and rep["value"] >= 0


@pytest.mark.parametrize("method,extra", [("frobenius", []), ("operator", []), ("plugin", ["--norm", "1"]),
                                          ("naive", ["--norm", "inf"]), ("er2inf", []),
                                          ("poly", ["--norm", "1", "--M", "3", "--K", "2"])])
def test_estimate_methods(capsys, ycsv, method, extra):
    code, out, _ = run(capsys, "estimate", "--input", ycsv, "--method", method, *extra)
    rep = json.loads(out)
    assert code == 0 and rep["estimator"] == method and rep["value"] >= 0


def test_poly_default_M_prints_scale_note(capsys, ycsv):
    code, _, err = run(capsys, "estimate", "--input", ycsv, "--method", "poly", "--norm", "1")
    assert code == 0 and "(pq)^(1/4)" in err


def test_spectrum_commands(capsys, ycsv):
    code, out, _ = run(capsys, "spectrum", "--input", ycsv, "--M", "2.5", "--K", "3", "--method", "lp")
    body = json.loads(out)
    assert code == 0 and len(body["sigma_hat"]) == 6 and body["grid_step"] > 0
    code, out, _ = run(capsys, "spectrum", "--input", ycsv, "--method", "plugin")
    assert code == 0 and len(json.loads(out)["sigma_hat"]) == 6


def test_rank_indices(capsys, tmp_path):
    path = tmp_path / "spec.csv"
    path.write_text("2\n1\n")
    code, out, _ = run(capsys, "rank-indices", "--spectrum", str(path), "--s", "2")
    body = json.loads(out)
    assert code == 0 and body["er_2_inf"] == pytest.approx(1.25) and body["er_2_s"] == pytest.approx(25 / 17)


def test_simulate(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"estimator": "frobenius", "grid": [[8, 8], [16, 16]], "replicates": 4, "seed": 1}))
    out, csv = tmp_path / "r.json", tmp_path / "r.csv"
    code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--out", str(out), "--csv", str(csv))
    assert code == 0 and len(json.loads(out.read_text())["cells"]) == 2
    first = out.read_text()
    run(capsys, "simulate", "--config", str(cfg), "--out", str(out))
    assert out.read_text() == first
    assert csv.read_text().splitlines()[0] == "p,q,estimator,mean_abs_err,se,n"


def test_errors_exit_nonzero(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    code, _, err = run(capsys, "estimate", "--input", str(bad), "--method", "frobenius")
    assert code == 2 and "error" in err
    code, _, err = run(capsys, "derive-coeffs")
    assert code == 2
