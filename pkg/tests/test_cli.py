import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from chbiot.cli import main
from chbiot.errors import ConfigurationError
from chbiot.experiments import bench_disk, run, sweep
from chbiot.io import RunConfig, read_csv


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_run_t_final_zero(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, "t_final = 0\n")
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    files = sorted(os.listdir(out))
    assert [f for f in files if f.startswith("snapshot_")] == ["snapshot_000000.vtk"]
    assert [f for f in files if f.startswith("cross_section_0")] == ["cross_section_000000.csv"]
    _, ts = read_csv(out / "timeseries.csv")
    assert ts.shape[0] == 1 and ts[0, 0] == 0.0


def test_unwritable_out_dir(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["run", "--out", str(blocker / "sub")])
    assert code == 4
    assert "I/O failure" in capsys.readouterr().err


def test_config_error_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "gamma = -1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "line 1" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_short_run_cadence_and_snapshot(tmp_path):
    cfg = RunConfig(t_final=0.005, output_every=2)
    res = run(cfg, out_dir=str(tmp_path))
    assert res.exit_status == 0
    _, ts = read_csv(tmp_path / "timeseries.csv")
    assert ts.shape[0] == 5 // 2 + 1
    assert np.all(np.diff(ts[:, 0]) > 0)
    assert (tmp_path / "cross_section_final.csv").exists()


def test_solver_failure_exit(tmp_path):
    cfg = RunConfig(t_final=0.003, newton_max_iter=1, newton_abs_tol=1e-14)
    res = run(cfg, out_dir=str(tmp_path))
    assert res.exit_status == 3 and res.failure_step == 1
    assert (tmp_path / "timeseries.csv").exists()
    assert main(["run", "--config", write_cfg(tmp_path, cfg.to_text()), "--out", str(tmp_path / "b")]) == 3


def test_sweep_single_member(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "t_final = 0.002\n")
    assert main(["sweep", "--config", cfg, "--ell", "0.1", "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "sweep_summary.csv", newline="") as fh:
        header, *rows = list(csv.reader(fh))
    assert header == ["ell", "h", "x_half", "width_19", "jump_p", "jump_u", "status"]
    assert len(rows) == 1 and rows[0][-1] == "ok" and float(rows[0][0]) == 0.1


def test_sweep_requires_descending():
    with pytest.raises(ConfigurationError):
        sweep(RunConfig(t_final=0.0), [0.05, 0.1])
    with pytest.raises(ConfigurationError):
        sweep(RunConfig(t_final=0.0), [])


def test_sweep_rows_in_input_order():
    rows, _ = sweep(RunConfig(t_final=0.0), [0.2, 0.1])
    assert [r.ell for r in rows] == [0.2, 0.1]


def test_disk_too_small():
    with pytest.raises(ConfigurationError):
        bench_disk(RunConfig(ell=0.1), r0=0.15)
    with pytest.raises(ConfigurationError):
        bench_disk(RunConfig(ell=0.1), r0=0.35)


def test_bench_disk_cli_config_error(capsys):
    assert main(["bench-disk", "--r0", "0.1"]) == 2


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)


def test_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, "t_final = 0.004\noutput_every = 2\n")
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    for f in sorted(os.listdir(tmp_path / "a")):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chbiot", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("run", "sweep", "bench-disk", "selftest"):
        assert cmd in proc.stdout


def test_reference_run_final_cross_section(tmp_path):
    res = run(RunConfig(ell=0.1), out_dir=str(tmp_path), write_snapshots=False)
    assert res.exit_status == 0
    _, data = read_csv(tmp_path / "cross_section_final.csv")
    phi = data[:, 1]
    assert phi[0] < 0.1 and phi[-1] > 0.9
    crossings = np.nonzero(np.diff(np.sign(phi - 0.5)))[0]
    assert len(crossings) == 1
    assert abs(data[crossings[0], 0] - 0.5) <= 0.1
    assert np.all(np.diff(phi) > 0)
