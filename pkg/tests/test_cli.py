import subprocess
import sys

import numpy as np
import pytest

from imcf.cli import EXIT_BREAKDOWN, EXIT_CERT_FAIL, EXIT_CONFIG, EXIT_OK, main
from imcf.geometry import GraphState, Grid
from imcf.io import write_snapshot

SMALL = """\
dimension = 1
grid.points_per_axis = 64
grid.length = 6.283185307179586
initial.family = sine
initial.a = 0.1
flow.t_end = 2.0
output.snapshot_times = 0.5, 1.0
"""


@pytest.fixture
def run_dir(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    return out


def test_run_writes_outputs(run_dir, capsys):
    names = {p.name for p in run_dir.iterdir()}
    assert {"monitors.csv", "certificates.txt", "rates.txt", "initial.snap", "termination.txt"} <= names
    assert {"snap_0000.snap", "snap_0001.snap"} <= names
    lines = (run_dir / "certificates.txt").read_text().splitlines()
    assert len(lines) == 8
    for line in lines:
        name, status, margin, at_t = line.split()
        assert status == "PASS"
        assert margin.startswith("worst_margin=") and at_t.startswith("at_t=")
    assert (run_dir / "termination.txt").read_text().startswith("completed")


def test_verify_passes_then_fails_on_tampering(run_dir):
    assert main(["verify", str(run_dir)]) == EXIT_OK
    csv = run_dir / "monitors.csv"
    lines = csv.read_text().splitlines()
    header = lines[0].split(",")
    col = header.index("y_sup")
    last = lines[-1].split(",")
    last[col] = "10.0"  # heights that failed to decay
    lines[-1] = ",".join(last)
    csv.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(run_dir), "--write"]) == EXIT_CERT_FAIL
    assert "y_barriers FAIL" in (run_dir / "certificates.txt").read_text()


def test_fit_writes_rates(run_dir, capsys):
    (run_dir / "rates.txt").unlink()
    assert main(["fit", str(run_dir)]) == EXIT_OK
    text = (run_dir / "rates.txt").read_text()
    assert text.startswith("grad_sup2 rate target=2.0")
    assert "hess_sup growth_ceiling" in text


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(SMALL + "flow.safety = 1.5\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "safety" in capsys.readouterr().err
    cfg.write_text(SMALL + "dimension = 2\n")
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_inadmissible_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "a.cfg"
    cfg.write_text(SMALL.replace("initial.a = 0.1", "initial.a = 1.0"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "inadmissible" in capsys.readouterr().err


def test_non_mean_convex_snapshot_breaks_down(tmp_path, capsys):
    grid = Grid(1, 64, 2.0)
    (x,) = grid.coords()
    snap = tmp_path / "bad.snap"
    write_snapshot(GraphState(grid, 0.0, 1 + 0.5 * np.sin(np.pi * x)), snap)
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL.replace("6.283185307179586", "2.0"))
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--out", str(out), "--initial-snapshot", str(snap)]) == EXIT_BREAKDOWN
    assert "lost_mean_convexity" in capsys.readouterr().err
    assert (out / "termination.txt").read_text().startswith("lost_mean_convexity")
    assert (out / "monitors.csv").exists()


def test_verify_missing_directory(tmp_path):
    assert main(["verify", str(tmp_path / "nothing")]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "imcf", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "demo" in proc.stdout


@pytest.mark.slow
def test_demo(tmp_path, capsys):
    assert main(["demo", "--out", str(tmp_path)]) == EXIT_OK
    first = (tmp_path / "horosphere" / "monitors.csv").read_text().splitlines()[1]
    assert first.split(",")[:7] == ["0", "1", "1", "1", "1", "2", "2"]
    assert "status=pass" in (tmp_path / "perturbed" / "rates.txt").read_text()
