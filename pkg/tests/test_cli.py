import csv
import json
import math

import numpy as np
import pytest

from fmps.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_exact_zero_coupling(capsys):
    code, out, _ = run_cli(capsys, "exact", "--gamma", "0")
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["energy_density"] - 0.5) < 1e-12


def test_exact_critical(capsys):
    code, out, _ = run_cli(capsys, "exact", "--gamma", "0.5")
    assert code == 0
    assert abs(json.loads(out)["energy_density"] - math.sqrt(2) / math.pi) < 1e-10


def test_exact_outside_physical_region(capsys):
    code, _, err = run_cli(capsys, "exact", "--gamma", "0.6")
    assert code == 2
    assert "error" in err


def test_usage_error_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["exact", "--no-such-flag"])
    assert exc.value.code == 1


def _groundstate_args(out_dir, extra=()):
    return [
        "groundstate", "--gamma", "0", "--dim-d", "4", "--chi", "2",
        "--tau-schedule", "0.1,0.05,0.01", "--max-steps-per-tau", "200",
        "--out", str(out_dir), *extra,
    ]


def test_groundstate_decoupled_run(tmp_path, capsys):
    code, _, _ = run_cli(capsys, *_groundstate_args(tmp_path / "run1"))
    assert code == 0
    summary = json.loads((tmp_path / "run1" / "summary.json").read_text())
    assert abs(summary["energy_density"] - 0.5) < 1e-8
    assert max(summary["entropy_per_bond"]) < 1e-10
    assert summary["xi"] == 0.0
    assert summary["converged"] is True
    assert (tmp_path / "run1" / "state.ckpt").exists()
    with open(tmp_path / "run1" / "run.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and "energy" in rows[0]


def test_groundstate_deterministic_summaries(tmp_path, capsys):
    run_cli(capsys, *_groundstate_args(tmp_path / "a"))
    run_cli(capsys, *_groundstate_args(tmp_path / "b"))
    sa = json.loads((tmp_path / "a" / "summary.json").read_text())
    sb = json.loads((tmp_path / "b" / "summary.json").read_text())
    sa.pop("wall_time_s"), sb.pop("wall_time_s")
    assert json.dumps(sa, sort_keys=True) == json.dumps(sb, sort_keys=True)
    assert (tmp_path / "a" / "state.ckpt").read_bytes() == (
        tmp_path / "b" / "state.ckpt"
    ).read_bytes()


def test_groundstate_nonconvergence_exit_code(tmp_path, capsys):
    code, _, _ = run_cli(
        capsys, "groundstate", "--gamma", "0.3", "--dim-d", "4", "--chi", "4",
        "--tau-schedule", "0.1", "--max-steps-per-tau", "1", "--tol", "1e-12",
        "--out", str(tmp_path),
    )
    assert code == 3
    assert json.loads((tmp_path / "summary.json").read_text())["converged"] is False


def test_config_file_and_cli_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "gamma = 0.3   # overridden by the flag\n"
        "dim_d = 4\nchi = 2\ntau_schedule = 0.1,0.05\nmax_steps_per_tau = 100\n"
    )
    code, _, _ = run_cli(
        capsys, "groundstate", "--gamma", "0", "--config", str(cfg),
        "--out", str(tmp_path / "out"),
    )
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["gamma"] == 0.0  # CLI wins
    assert summary["dim_d"] == 4  # file beats default 16


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("gamma = 0.1\nbogus = 3\n")
    code, _, err = run_cli(
        capsys, "groundstate", "--config", str(cfg), "--out", str(tmp_path)
    )
    assert code == 1
    assert "bogus" in err


def test_sweep_small_grid(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--gamma", "0", "--dim-d", "4", "--chi-grid", "2,3",
        "--tau-schedule", "0.1,0.05", "--max-steps-per-tau", "100",
        "--out", str(out),
    )
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["chi"] for r in rows] == ["2", "3"]
    assert all(r["status"] == "ok" for r in rows)
    assert all(abs(float(r["energy"]) - 0.5) < 1e-8 for r in rows)
    # rows are self-contained
    assert {"gamma", "gamma3", "dim_d", "chi", "cell_k"} <= set(rows[0])


def test_sweep_empty_grid_is_noop(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--gamma", "0", "--chi-grid", "", "--out", str(out)
    )
    assert code == 0
    with open(out) as fh:
        assert list(csv.DictReader(fh)) == []


def test_sweep_records_failures_per_row(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--gamma-grid", "0.0,0.9", "--dim-d", "4", "--chi", "2",
        "--tau-schedule", "0.1", "--max-steps-per-tau", "20", "--cell-k", "5",
        "--out", str(out),
    )
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert all(r["status"].startswith("failed") for r in rows)


def test_scaling_on_synthetic_csv(tmp_path, capsys):
    path = tmp_path / "data.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "gamma3", "chi", "entropy", "xi", "status"])
        for chi in (4, 8, 12, 16, 24, 32):
            writer.writerow(
                [0.5, 0.0, chi, 0.23 * np.log(chi) + 0.1, 2.0 * chi**1.32, "ok"]
            )
    report_path = tmp_path / "fit.json"
    code, _, _ = run_cli(
        capsys, "scaling", "--input", str(path), "--out", str(report_path)
    )
    assert code == 0
    report = json.loads(report_path.read_text())
    assert abs(report["kappa"] - 1.32) < 1e-10
    assert abs(report["eta"] - 0.23) < 1e-10
    assert abs(report["central_charge"] - 6 * 0.23 / 1.32) < 1e-10
    assert len(report["c_vs_chi_max"]) == 4


def test_scaling_insufficient_data(tmp_path, capsys):
    path = tmp_path / "data.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "gamma3", "chi", "entropy", "xi", "status"])
        writer.writerow([0.5, 0.0, 8, 0.4, 10.0, "ok"])
        writer.writerow([0.5, 0.0, 16, 0.5, 20.0, "ok"])
    code, _, err = run_cli(capsys, "scaling", "--input", str(path))
    assert code == 1
    assert "error" in err


def test_fidelity_same_checkpoint(tmp_path, capsys):
    run_cli(capsys, *_groundstate_args(tmp_path / "run"))
    ckpt = str(tmp_path / "run" / "state.ckpt")
    code, out, _ = run_cli(capsys, "fidelity", ckpt, ckpt)
    assert code == 0
    payload = json.loads(out)
    assert abs(payload["fidelity"] - 1.0) < 1e-10
