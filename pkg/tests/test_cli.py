import subprocess
import sys

import numpy as np
import pytest

from cfpower.cli import main
from cfpower.experiments import RESULTS_HEADER


def test_generate_then_solve(tmp_path, capsys):
    assert main(["generate", "--M", "20", "--K", "4", "--seed", "3", "--out", str(tmp_path / "drop")]) == 0
    assert (tmp_path / "drop" / "beta.csv").is_file()
    assert main(["solve", "--scenario", str(tmp_path / "drop"), "--kind", "HRmax",
                 "--out", str(tmp_path / "sol")]) == 0
    mu = np.loadtxt(tmp_path / "sol" / "allocation.csv", delimiter=",", ndmin=2)
    assert mu.shape == (20, 4)
    assert (tmp_path / "sol" / "trace.csv").read_text().startswith("iter,objective")
    se = (tmp_path / "sol" / "per_user_se.csv").read_text().splitlines()
    assert se[0] == "user,se_bits_hz" and len(se) == 5
    assert "HRmax" in capsys.readouterr().out


def test_solve_from_seed_matches_bundle(tmp_path):
    main(["generate", "--M", "15", "--K", "3", "--seed", "9", "--out", str(tmp_path / "drop")])
    main(["solve", "--scenario", str(tmp_path / "drop"), "--out", str(tmp_path / "a")])
    main(["solve", "--M", "15", "--K", "3", "--seed", "9", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "allocation.csv").read_bytes() == (tmp_path / "b" / "allocation.csv").read_bytes()


def test_experiment(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\ntype = cdf\nkinds = SEmax, EPA\n[scenario]\nM = 12\nK = 3\n")
    assert main(["experiment", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "results.csv").read_text().splitlines()
    assert lines[0] == RESULTS_HEADER and len(lines) == 1 + 2 * 3
    assert lines[1].split(",")[1] == "4"
    assert "seed=4" in (tmp_path / "o" / "meta.txt").read_text()


@pytest.mark.parametrize("argv", [
    ["solve", "--M", "0", "--K", "3"],
    ["generate", "--K", "-1"],
    ["solve", "--scenario", "/nonexistent/bundle"],
])
def test_validation_failures(tmp_path, capsys, argv):
    assert main(argv + ["--out", str(tmp_path / "x")]) != 0
    assert "error" in capsys.readouterr().err


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nbogus = 1\n")
    assert main(["experiment", "--config", str(cfg)]) != 0
    assert "bogus" in capsys.readouterr().err


def test_bench_small(tmp_path, capsys):
    code = main(["bench", "--K", "2", "--M-list", "4", "8", "--iters", "3", "--repeats", "1",
                 "--no-solve", "--out", str(tmp_path / "t.csv")])
    assert code in (0, 1)      # tiny sizes make the ratio band meaningless
    assert (tmp_path / "t.csv").read_text().startswith("M,K,per_iter_s")
    assert "band" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cfpower", "generate", "--M", "3", "--K", "2",
                        "--out", str(tmp_path / "d")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "cfpower", "solve"], capture_output=True, text=True)
    assert r.returncode != 0 and "required" in r.stderr
