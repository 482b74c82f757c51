import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from obscoherence.cli import main, run_suite, run_sweep, sidecar_path
from obscoherence.linalg import save_matrix
from obscoherence.models import SIGMA_X, SIGMA_Z, random_observable


@pytest.fixture
def files(tmp_path):
    def write(name, m):
        path = tmp_path / name
        save_matrix(path, m)
        return str(path)
    return write


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_measure_plus_state(files, capsys):
    code = main(["measure", "--observable", files("sx.json", SIGMA_X), "--state", files("p.json", np.full((2, 2), 0.5))])
    assert code == 0
    rec = _json(capsys)
    assert rec["measure"] == pytest.approx(1, abs=1e-6)
    assert rec["diagnostics"]["channel_is_cptp"] and rec["diagnostics"]["channel_is_mio"]
    assert rec["channel"]["kind"] == "choi"


def test_measure_incoherent(files, capsys, tmp_path):
    out = tmp_path / "rec.json"
    code = main(["measure", "--observable", files("sx.json", SIGMA_X), "--state", files("d.json", np.diag([0.3, 0.7])),
                 "--formulation", "reduced", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["measure"] <= 1e-7


def test_measure_malformed_json(tmp_path, files, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"rows": 2, "cols": 2, "data": [')
    code = main(["measure", "--observable", str(bad), "--state", files("d.json", np.eye(2) / 2)])
    assert code == 1
    assert "line 1" in capsys.readouterr().err


def test_measure_validation_errors(files, capsys):
    assert main(["measure", "--observable", files("sx.json", SIGMA_X), "--state", files("bad.json", np.eye(2))]) == 1
    assert "trace" in capsys.readouterr().err
    assert main(["measure", "--observable", files("sx.json", SIGMA_X)]) == 1
    assert main(["measure", "--model", "spin_x:1", "--state", "/nonexistent.json"]) == 1


def test_measure_solver_failure_exit(files, capsys, monkeypatch):
    monkeypatch.setenv("OBSCOHERENCE_TOL", "max_iter=1")
    code = main(["measure", "--observable", files("sx.json", SIGMA_X), "--state", files("p.json", np.full((2, 2), 0.5))])
    assert code == 2
    assert "bounds" in capsys.readouterr().err


def test_measure_models_and_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code = main(["measure", "--model", "spin_x:1", "--model", "max_coherent:2", "--trace", str(trace)])
    assert code == 0
    assert _json(capsys)["measure"] == pytest.approx(0.5, abs=1e-6)
    rows = list(csv.reader(trace.open()))
    assert rows[0][:6] == ["iter", "primal", "dual", "gap", "alpha_p", "alpha_d"]
    assert len(rows) > 2


def test_basis_schur_horn(files, capsys):
    assert main(["basis", "--observable", files("sz.json", SIGMA_Z)]) == 0
    out = _json(capsys)
    assert out["diagonal_residual"] <= 1e-10 and out["rotations"] == 1


def test_basis_fourier(files, capsys):
    assert main(["basis", "--observable", files("m.json", random_observable(5, 1)), "--method", "fourier_mub"]) == 0
    assert _json(capsys)["diagonal_residual"] <= 1e-10


def test_basis_trivial(files, capsys, caplog):
    assert main(["basis", "--observable", files("id.json", np.eye(4))]) == 0
    out = _json(capsys)
    assert out["warnings"] and "trivial" in caplog.text
    assert out["unitary"]["data"][0] == [1.0, 0.0] and out["rotations"] == 0


def test_hierarchy_random_batch(capsys):
    assert main(["hierarchy", "--random", "3", "10", "0"]) == 0
    out = _json(capsys)
    assert out["violations"] == 0 and len(out["reports"]) == 10


def test_hierarchy_qubit_columns_equal(capsys):
    assert main(["hierarchy", "--random", "2", "5", "1"]) == 0
    for rep in _json(capsys)["reports"]:
        assert rep["nm_cr"] == pytest.approx(rep["nm_cl1"], abs=1e-6)


def test_hierarchy_witness_tight(files, capsys):
    from obscoherence.models import random_state
    code = main(["hierarchy", "--witness", "--model", "spin_x:1", "--state", files("r.json", random_state(3, 4))])
    assert code == 0
    assert "c_mio<=nm_cr" in _json(capsys)["reports"][0]["tight"]


def test_hierarchy_violation_exit(files, capsys):
    # a diagonal observable is outside the zero-diagonal setting; the broken link is reported
    from obscoherence.models import random_state
    code = main(["hierarchy", "--observable", files("m.json", np.diag([1.0, 0.0])), "--state", files("r.json", random_state(2, 1))])
    assert code == 3
    assert _json(capsys)["violations"] == 1


def _read_csv(path):
    rows = list(csv.reader(open(path)))
    return rows[0], np.array(rows[1:], dtype=float)


def test_figure1(tmp_path):
    out = tmp_path / "fig1.csv"
    assert main(["figure1", "--steps", "3", "--out", str(out), "--workers", "1"]) == 0
    header, data = _read_csv(out)
    assert header == ["p", "c_l1", "c_r", "c_mio"]
    assert np.allclose(data[:, 0], [0, 0.5, 1])
    assert np.all(np.abs(data[0, 1:]) <= 1e-7)
    assert data[-1, 1] == pytest.approx(2 / 7, abs=1e-8)
    meta = json.loads(open(sidecar_path(str(out))).read())
    assert meta["grid"] == [0.0, 0.5, 1.0]
    assert len(meta["points"]) == 3 and all("iterations" in p and "wall_time" in p for p in meta["points"])
    assert meta["spin_convention"].startswith("S_x^i = sigma_x/2")
    assert "tolerances" in meta


def test_figure1_text_format(tmp_path):
    out = tmp_path / "fig1.csv"
    main(["figure1", "--steps", "2", "--out", str(out), "--workers", "1"])
    line = open(out).read().splitlines()[2]
    assert line.split(",")[1] == "%.12g" % (2 / 7)


def test_figure2_pi_over_four(tmp_path):
    out = tmp_path / "fig2.csv"
    assert main(["figure2", "--steps", "3", "--out", str(out), "--workers", "1", "--io-lower"]) == 0
    header, data = _read_csv(out)
    assert header == ["theta", "c_l1", "c_r", "c_mio", "c_io_lower"]
    mid = data[1]
    assert mid[0] == pytest.approx(math.pi / 4)
    assert mid[1] == pytest.approx(7, abs=1e-8)
    assert mid[2] == pytest.approx(mid[1], abs=1e-5)
    assert mid[4] <= mid[3] + 1e-6


def test_figure2_refuses_large_faithful(tmp_path, capsys):
    code = main(["figure2", "--n-active", "5", "--formulation", "faithful", "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert "budget" in capsys.readouterr().err
    assert main(["figure1", "--steps", "1", "--out", str(tmp_path / "y.csv")]) == 1


def test_sweep_order_is_grid_order():
    grid = [1.0, 0.0, 0.5]
    opts = {"formulation": "reduced", "tol": None}
    serial = run_sweep("figure1", grid, opts, workers=1)
    pooled = run_sweep("figure1", grid, opts, workers=2)
    for (a, _), (b, _) in zip(serial, pooled):
        assert a == b
    assert serial[1][0]["c_l1"] == 0


@pytest.mark.parametrize("suite", ["duality", "monotonicity", "invariants"])
def test_check_suites(suite, capsys):
    assert main(["check", "--suite", suite, "--seed", "1", "--count", "4"]) == 0
    out = _json(capsys)
    assert out["passed"] and out["instances"] == 4 and out["seed"] == 1


def test_check_suite_deterministic():
    a = run_suite("duality", seed=3, count=2)
    b = run_suite("duality", seed=3, count=2)
    assert a == b


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "obscoherence.cli", "measure", "--model", "spin_x:1",
                          "--model", "w_mixture:0.5"], capture_output=True, text=True)
    assert out.returncode == 1  # dimension mismatch between the two models
    assert "differ" in out.stderr
