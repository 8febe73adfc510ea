import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import tracegen as tg
from vibrolift.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main

FIXTURES = sorted((Path(__file__).parent / "fixtures").glob("trial_*.csv"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_reference_summary(capsys):
    code, out, _ = run(capsys, "simulate", "--waveform", "optimal", "--fn", "5", "--alpha", "10",
                       "--mus", "0.7", "--muk", "0.6")
    assert code == EXIT_OK
    s = json.loads(out)
    assert s["v_norm"] == pytest.approx(525 / 1690, rel=1e-3)
    assert s["v_norm_closed_form"] == pytest.approx(525 / 1690)
    assert s["converged"] and s["violated_bounds"] == []
    assert s["min_part_velocity"] < 0
    assert s["mode_fractions"]["SlippingDown"] == 0.0


def test_simulate_writes_trajectory(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", "--periods", "5", "--steps", "100", "--out", str(out_csv))
    assert code == EXIT_OK
    with open(out_csv) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    assert rows[0][:3] == ["t", "z_S", "v_S"]
    assert len(rows) == 5 * 100 + 2
    out_json = tmp_path / "traj.json"
    assert run(capsys, "simulate", "--periods", "5", "--steps", "50", "--out", str(out_json),
               "--format", "json")[0] == EXIT_OK
    data = json.loads(out_json.read_text())
    assert set(data["mode"]) <= {"Sticking", "SlippingUp"}


def test_simulate_zero_sampled_waveform(tmp_path, capsys):
    wf = tmp_path / "zero.csv"
    wf.write_text("t,a\n" + "".join(f"{i * 0.001},0.0\n" for i in range(50)))
    code, out, _ = run(capsys, "simulate", "--waveform", "file", "--waveform-file", str(wf))
    assert code == EXIT_OK
    s = json.loads(out)
    assert s["v_ave"] == 0.0
    assert s["mode_fractions"]["Sticking"] == 1.0


def test_simulate_infeasible_force_names_bound(capsys):
    code, _, err = run(capsys, "simulate", "--fn", "16", "--alpha", "10", "--muk", "0.6")
    assert code == EXIT_VALIDATION
    assert "max_normal_force" in err and "15" in err


def test_simulate_sawtooth(capsys):
    code, out, _ = run(capsys, "simulate", "--waveform", "sawtooth", "--periods", "12")
    assert code == EXIT_OK
    assert json.loads(out)["waveform"] == "sawtooth"


def test_sweep_single_point(capsys):
    code, out, err = run(capsys, "sweep", "--alphas", "10", "--fn-grid", "5")
    assert code == EXIT_OK
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["alpha", "f_n", "v_norm", "feasible"]
    assert len(rows) == 2
    assert float(rows[1][2]) == pytest.approx(525 / 1690)
    assert json.loads(err)["rows"] == 1


def test_sweep_default_grid_zeros(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, summary, _ = run(capsys, "sweep", "--out", str(out))
    assert code == EXIT_OK
    table = np.genfromtxt(out, delimiter=",", names=True)
    assert len(table) == 6 * 400
    for entry in json.loads(summary)["optimum"]:
        a = entry["alpha"]
        assert entry["f_n_min"] == pytest.approx(1 / 0.7)
        assert entry["f_n_max"] == pytest.approx((a - 1) / 0.6)
        row = table[table["alpha"] == a]
        pos = row["f_n"][row["v_norm"] > 0]
        assert pos.min() > 1 / 0.7 and pos.max() < (a - 1) / 0.6
        step = row["f_n"][1] - row["f_n"][0]
        assert pos.min() - 1 / 0.7 <= step
        if (a - 1) / 0.6 < row["f_n"][-1]:
            assert (a - 1) / 0.6 - pos.max() <= step


def test_sweep_verify_sim(capsys, tmp_path):
    out = tmp_path / "s.json"
    code, summary, _ = run(capsys, "sweep", "--alphas", "10,20", "--fn-grid", "2:12:11",
                           "--verify-sim", "4", "--format", "json", "--out", str(out))
    assert code == EXIT_OK
    checks = json.loads(summary)["verification"]
    assert len(checks) == 4 and all(c["rel_error"] < 0.01 for c in checks)
    assert len(json.loads(out.read_text())["table"]) == 22


@pytest.mark.parametrize("grid", ["1:2", "a,b", "3:1:5", ""])
def test_sweep_malformed_grid(capsys, grid):
    assert run(capsys, "sweep", "--fn-grid", grid)[0] == EXIT_VALIDATION


def test_optimal_fn_and_feasibility(capsys):
    code, out, _ = run(capsys, "optimal-fn", "--alpha", "10")
    assert code == EXIT_OK
    assert json.loads(out)["f_n_max"] == pytest.approx(15.0)
    code, out, _ = run(capsys, "feasibility", "--fn", "1.6", "--alpha", "10")
    assert code == EXIT_OK
    assert json.loads(out)["violated"] == ["slip_recovery"]
    code, _, _ = run(capsys, "optimal-fn", "--alpha", str(1 + 0.6 / 0.7))
    assert code == EXIT_VALIDATION


def test_config_defaults_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"fn": 16, "alpha": 10}))
    code, out, _ = run(capsys, "--config", str(cfg), "feasibility")
    assert code == EXIT_OK
    assert "max_normal_force" in json.loads(out)["violated"]
    code, out, _ = run(capsys, "--config", str(cfg), "feasibility", "--fn", "5")
    assert json.loads(out)["violated"] == []


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    code, _, err = run(capsys, "--config", str(cfg), "feasibility")
    assert code == EXIT_VALIDATION and "nonsense" in err
    cfg.write_text("[1, 2]")
    assert run(capsys, "--config", str(cfg), "feasibility")[0] == EXIT_VALIDATION


def test_fit_requires_traces(capsys):
    assert run(capsys, "fit")[0] == EXIT_VALIDATION


def test_fit_missing_file_named(capsys, tmp_path):
    missing = tmp_path / "nope.csv"
    code, _, err = run(capsys, "fit", str(missing))
    assert code == EXIT_VALIDATION and "nope.csv" in err


def test_fit_report_is_byte_identical_per_seed(tmp_path, capsys):
    quick = ["--particles", "10", "--max-iter", "8", "--restarts", "1", "--seed", "5"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "fit", *map(str, FIXTURES[:2]), *quick, "--out", str(a))[0] == EXIT_OK
    assert run(capsys, "fit", *map(str, FIXTURES[:2]), *quick, "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_fit_on_shipped_fixtures(capsys):
    code, out, _ = run(capsys, "fit", *map(str, FIXTURES))
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["settings"]["traces"] == [str(p) for p in FIXTURES]
    truth = [f for *_, f in tg.TRIALS]
    assert report["mu_k"] == pytest.approx(tg.MU_K, rel=0.05)
    assert np.allclose(report["normal_forces"], truth, rtol=0.10)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "vibrolift", "feasibility", "--fn", "5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["feasible"] is True


def test_runtime_error_code(tmp_path, capsys):
    bad = tmp_path / "dir.csv"
    bad.mkdir()
    code, _, _ = run(capsys, "simulate", "--waveform", "file", "--waveform-file", str(bad))
    assert code == EXIT_RUNTIME
