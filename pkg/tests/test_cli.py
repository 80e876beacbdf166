import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from wavecrest.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def cfg(name):
    return str(CONFIGS / name)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


def test_frame_check_euler(capsys):
    code, rep, _ = run_json(capsys, "frame", "check", "--config", cfg("euler_frame.cfg"))
    assert code == 0 and rep["verdict"] == "pass"
    verdicts = {tuple(p["names"]): p["verdict"] for p in rep["result"]["pairs"]}
    assert verdicts == {("X+", "X-"): "quasirect", ("X+", "X0"): "not_quasirect", ("X-", "X0"): "not_quasirect"}
    assert rep["command"] == "frame check" and "generated" in rep


def test_frame_check_expectations(capsys):
    code, rep, _ = run_json(capsys, "frame", "check", "--config", cfg("euler_frame.cfg"), "--expect", "all-quasirect")
    assert code == 1 and rep["verdict"] == "fail"
    assert run(capsys, "frame", "check", "--config", cfg("euler_frame.cfg"), "--expect", "maybe")[0] == 2


def test_frame_classify_heisenberg(capsys):
    code, rep, _ = run_json(capsys, "frame", "classify", "--config", cfg("heisenberg.cfg"),
                            "--phi", cfg("heisenberg_phi.cfg"), "--expect", "heisenberg3")
    assert code == 0
    assert rep["result"]["class"] == "heisenberg3" and rep["result"]["class_quasirect"] is False
    assert rep["config"]["phi"]["phi2"] == "1/x"


def test_frame_classify_raw_euler_is_non_constant(capsys):
    code, rep, _ = run_json(capsys, "frame", "classify", "--config", cfg("euler_frame.cfg"))
    assert code == 1 and rep["result"]["error"] == "non-constant"
    lo, hi = rep["result"]["range"]
    assert hi - lo > 0.1


def test_frame_rescale(capsys):
    code, rep, _ = run_json(capsys, "frame", "rescale", "--config", cfg("heisenberg.cfg"),
                            "--phi", cfg("heisenberg_phi.cfg"))
    assert code == 0
    r = rep["result"]
    assert r["constant"] and r["class"] == "heisenberg3"
    assert np.allclose(r["constants"], [0, 0, 1, 0, 0, 0, 0, 0, 0], atol=1e-12)
    assert r["system"]["verdict"] == "solves"


def test_frame_rescale_needs_phi(capsys):
    assert run(capsys, "frame", "rescale", "--config", cfg("heisenberg.cfg"))[0] == 2


def test_euler_table(capsys, tmp_path):
    out = tmp_path / "table"
    code, _, _ = run(capsys, "euler", "table", "--kappa", "3", "--out", str(out), "--format", "json",
                     "--format", "csv")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["result"]["max_deviation"] < 1e-10
    rows = list(csv.reader(io.StringIO((out / "report.csv").read_text())))
    assert rows[0] == ["pair", "X+", "X-", "X0"] and len(rows) == 4


def test_euler_geometry(capsys):
    code, rep, _ = run_json(capsys, "euler", "geometry", "--t3", "0.3", "--seed", "9")
    assert code == 0 and rep["seed"] == 9
    r = rep["result"]
    assert r["max_abs_K"] < 1e-12 and r["max_abs_H_minus_L_half"] < 1e-12
    assert r["printed_normal_defect"] > 1


def test_simulate_constant_state_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--config", cfg("constant_sim.cfg"), "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["step", "time", "x", "v_1", "v_2", "v_3"]
    data = np.array(rows[1:], dtype=float)
    assert len(data) > 32
    assert np.all(data[:, 3:] == [1, 1, 0.5])


def test_simulate_csv_full_precision(capsys, tmp_path):
    target = tmp_path / "run.csv"
    assert main(["simulate", "--config", cfg("constant_sim.cfg"), "--out", str(target)]) == 0
    capsys.readouterr()
    text = target.read_text()
    x = [float(r[2]) for r in list(csv.reader(io.StringIO(text)))[1:]]
    assert x[1] == 6.283185307179586 / 32
    assert json.loads(target.with_suffix(".json").read_text())["command"] == "simulate"


def test_simulate_svg(capsys, tmp_path):
    assert main(["simulate", "--config", cfg("constant_sim.cfg"), "--out", str(tmp_path), "--format", "svg",
                 "--no-timestamp"]) == 0
    svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert len(svgs) == 3 and {s.split("_")[1] for s in svgs} == {"rho", "p", "u"}
    assert all((tmp_path / s).read_text().startswith("<svg") for s in svgs)


def test_svg_needs_out(capsys):
    assert run(capsys, "simulate", "--config", cfg("constant_sim.cfg"), "--format", "svg")[0] == 2


def test_simulate_exact_reduced(capsys):
    code, rep, _ = run_json(capsys, "simulate", "--config", cfg("exact_sim.cfg"), "--N", "200")
    assert code == 0
    r = rep["result"]
    assert r["system"] == "reduced_nonelastic" and r["final_time"] == pytest.approx(0.2)
    assert r["residual"]["max"] < 1e-4
    assert rep["config"]["sim"]["N"] == 200


def test_simulate_ic_overlay(capsys):
    code, rep, _ = run_json(capsys, "simulate", "--config", cfg("constant_sim.cfg"), "--system", "reduced-nonelastic",
                            "--ic", cfg("ic_exact.cfg"), "--bc", "extrapolate", "--t-end", "0.05")
    assert code == 0 and rep["result"]["components"] == ["t1", "t2", "t3"]


def test_simulate_ic_mismatch(capsys):
    code, _, err = run(capsys, "simulate", "--config", cfg("constant_sim.cfg"), "--system", "reduced_elastic")
    assert code == 2 and "[ic]" in err


def test_custom_system(capsys, tmp_path):
    p = tmp_path / "adv.cfg"
    p.write_text("[chart]\nnames = [w]\n[sim]\nsystem = custom\nmatrix = [[1]]\nbc = periodic\n"
                 "x_max = 6.283185307179586\nN = 64\nt_end = 0.5\n[ic]\nw = sin(x)\n")
    code, rep, _ = run_json(capsys, "simulate", "--config", str(p))
    assert code == 0 and rep["result"]["components"] == ["w"]


def test_verify_is_deterministic(capsys, monkeypatch):
    code, first, err = run(capsys, "verify", "--no-timestamp")
    assert code == 0
    lines = err.strip().splitlines()
    assert len(lines) == 11 and all(l.startswith("PASS ") for l in lines)
    monkeypatch.setenv("WAVECREST_THREADS", "4")
    code, second, _ = run(capsys, "verify", "--no-timestamp")
    assert code == 0 and first == second
    assert "generated" not in json.loads(first)


def test_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("WAVECREST_THREADS", "many")
    assert run(capsys, "verify")[0] == 2


def test_separable_gradient(capsys):
    code, rep, _ = run_json(capsys, "separable", "--config", cfg("separable.cfg"))
    assert code == 0
    assert rep["result"]["report"]["max_row_residual"] < 1e-9
    assert rep["result"]["row_identity"] < 1e-9


def test_separable_incompatible(capsys):
    code, rep, _ = run_json(capsys, "separable", "--A", "x^2", "--B", "t^3")
    assert code == 1 and "error" in rep["result"]


def test_separable_closed_branch_reports_status(capsys):
    code, rep, _ = run_json(capsys, "separable", "--A", "x", "--B", "t", "--branch", "closed1")
    assert code == 1 and rep["result"]["report"]["status"] == "denominator_root"


@pytest.mark.parametrize("argv", [
    ["frame", "check", "--bogus"],
    ["frame"],
    ["frame", "check", "--config", "/nonexistent.cfg"],
    ["frame", "check", "--seed", "-1", "--config", "x.cfg"],
    ["euler", "table", "--kappa", "abc"],
    ["euler", "table", "--kappa", "0"],
    ["simulate", "--scheme", "upwind"],
])
def test_usage_errors(capsys, argv):
    assert main(argv) == 2


def test_unknown_config_key(capsys, tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[sim]\nspeed = 2\n")
    code, _, err = run(capsys, "simulate", "--config", str(p))
    assert code == 2 and "unknown key" in err


def test_bad_expression_reports_offset(capsys, tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text((CONFIGS / "heisenberg.cfg").read_text().replace("x^2", "x^^2"))
    code, _, err = run(capsys, "frame", "check", "--config", str(p))
    assert code == 2 and "at byte 2" in err


@pytest.mark.parametrize("argv", [
    ["frame", "check", "--config", cfg("euler_frame.cfg")],
    ["euler", "table"],
    ["separable", "--config", cfg("separable.cfg")],
])
def test_reports_embed_config_and_seed(capsys, argv):
    code, rep, _ = run_json(capsys, *argv, "--seed", "1234")
    assert rep["seed"] == 1234 and rep["config"]["sample_domain"]["seed"] == 1234
    assert set(rep) >= {"command", "version", "verdict", "seed", "config", "result"}
