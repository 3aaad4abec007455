"""CLI subcommands: exit codes, validation, reproducible output."""

import subprocess
import sys

import pytest

from dfscore.cli import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_OK, main

IS_SWEEP = """
[model]
kind = conjugate-gaussian
dim = 1

[estimator]
method = is-score
theta = 1.0
kernel_sigmas = 1.0

[grid]
tau = 0.2, 0.1
n = 500

[run]
replications = 2
seed = 3
"""

SMC_POINT = """
[model]
kind = lgssm
free = phi
log_sigma_v = 0.0
log_sigma_w = 0.0
init = fixed
init_sd = 1.0
theta_true = 0.5
data_seed = 3
horizon = 8

[estimator]
method = smc-score
theta = 0.4
kernel_sigmas = 1.0

[grid]
tau = 0.1
n = 200
delta = 2

[run]
replications = 2
seed = 5
"""


def write(tmp_path, text, name):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_estimate_exit_code_and_output(tmp_path):
    config = write(tmp_path, SMC_POINT, "smc.ini")
    out = tmp_path / "out.csv"
    assert main(["estimate", "--config", config, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2  # header + one score row per replication


def test_estimate_rejects_non_singleton_grid(tmp_path):
    config = write(tmp_path, IS_SWEEP, "sweep.ini")
    assert (
        main(["estimate", "--config", config, "--out", str(tmp_path / "o.csv")])
        == EXIT_CONFIG
    )


def test_sweep_requires_multiple_points(tmp_path):
    config = write(tmp_path, SMC_POINT, "smc.ini")
    assert (
        main(["sweep-tau", "--config", config, "--out", str(tmp_path / "o.csv")])
        == EXIT_CONFIG
    )
    sweep = write(tmp_path, IS_SWEEP, "sweep.ini")
    assert (
        main(["sweep-tau", "--config", sweep, "--out", str(tmp_path / "s.csv")])
        == EXIT_OK
    )


def test_seed_flag_changes_output(tmp_path):
    config = write(tmp_path, SMC_POINT, "smc.ini")
    a, b, c = (str(tmp_path / name) for name in ("a.csv", "b.csv", "c.csv"))
    main(["estimate", "--config", config, "--out", a])
    main(["estimate", "--config", config, "--out", b, "--seed", "999"])
    main(["estimate", "--config", config, "--out", c, "--seed", "999"])
    assert open(a).read() != open(b).read()
    assert open(b).read() == open(c).read()


def test_missing_config_file(tmp_path):
    assert (
        main(["estimate", "--config", str(tmp_path / "nope.ini"), "--out", "x.csv"])
        == EXIT_CONFIG
    )


def test_all_runs_failed_exit_code(tmp_path):
    # Poisson at theta=800: every importance weight is zero in every rep
    text = IS_SWEEP.replace("kind = conjugate-gaussian\ndim = 1", "kind = poisson\ny = 3")
    text = text.replace("theta = 1.0", "theta = 800.0")
    text = text.replace("tau = 0.2, 0.1", "tau = 0.1")
    config = write(tmp_path, text, "fail.ini")
    out = tmp_path / "f.csv"
    assert main(["estimate", "--config", config, "--out", str(out)]) == EXIT_ALL_FAILED
    assert "DegeneratePosteriorError" in out.read_text()


def test_console_entry_point_runs(tmp_path):
    config = write(tmp_path, SMC_POINT, "smc.ini")
    out = tmp_path / "sub.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "dfscore.cli", "estimate", "--config", config, "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


@pytest.mark.parametrize("command", ["sweep-n", "sweep-lag"])
def test_other_sweeps_run(tmp_path, command):
    grid_key = {"sweep-n": "n = 200", "sweep-lag": "delta = 2"}[command]
    replacement = {"sweep-n": "n = 200, 400", "sweep-lag": "delta = 0, 2"}[command]
    config = write(tmp_path, SMC_POINT.replace(grid_key, replacement), "g.ini")
    out = tmp_path / "g.csv"
    assert main([command, "--config", config, "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 4  # 2 grid points x 2 reps
