import subprocess
import sys

import pytest

from votermix.cli import run


def test_exact_tmix(capsys):
    assert run(["exact", "--cycle", "4", "--tmix", "0.25"]) == 0
    assert "t_mix(0.25) =" in capsys.readouterr().out


def test_exact_capacity_error(capsys):
    assert run(["exact", "--cycle", "25", "--t", "1"]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_errors():
    assert run(["exact", "--cycle", "4", "--bogus"]) == 2
    assert run([]) == 2
    assert run(["simulate", "--cycle", "4", "--samples", "0"]) == 2


def test_missing_kernel_file(tmp_path):
    assert run(["exact", "--kernel", str(tmp_path / "nope.txt"), "--t", "1"]) == 1


def test_channel_check(capsys):
    assert run(["channel-check", "--grid", "5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("theta,theta1,theta2,alpha,discrepancy\n")
    worst = float(out.strip().splitlines()[-1].split()[2])
    assert worst <= 1e-12


def test_ising_check(capsys):
    assert run(["ising-check", "--sizes", "3,4", "--betas", "0,1"]) == 0
    assert capsys.readouterr().out.startswith("n,beta,discrepancy\n")


def test_bounds(capsys):
    assert run(["bounds", "--n", "256", "--alpha", "2", "--C", "4"]) == 0
    rows = dict(line.split(",") for line in capsys.readouterr().out.strip().splitlines()[1:])
    assert float(rows["wilson_formula"]) == pytest.approx(0.374, abs=5e-4)
    assert rows["wilson_valid"] == "0"
    assert float(rows["star_lower_bound"]) == pytest.approx(0.532, abs=5e-4)
    assert run(["bounds"]) == 1


def test_star(capsys):
    assert run(["star", "--n", "20", "--times", "0,1"]) == 0
    assert capsys.readouterr().out.startswith("n,t,tv\n20,0,")


def test_dual_check(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["dual-check", "--cycle", "4", "--samples", "300", "--out", str(out)]) == 0
    assert "mismatches,0" in out.read_text()


@pytest.mark.parametrize("argv", [
    ["simulate", "--cycle", "5", "--t", "0.7", "--samples", "25000"],
    ["simulate", "--star", "3", "--method", "perfect", "--samples", "25000"],
    ["simulate", "--cycle", "4", "--method", "dual", "--samples", "200"],
    ["cutoff-profile", "--sizes", "16", "--alphas", "0,1", "--samples", "2000"],
])
def test_reproducible_output(tmp_path, argv):
    texts = []
    for threads in ("1", "3"):
        out = tmp_path / f"o{threads}.csv"
        assert run(argv + ["--seed", "9", "--threads", threads, "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]
    other = tmp_path / "other.csv"
    run(argv + ["--seed", "10", "--out", str(other)])
    assert other.read_bytes() != texts[0]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "votermix.cli", "bounds", "--C", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "quantity,value"
