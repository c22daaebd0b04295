import subprocess
import sys

import pytest

from nearcrit.cli import EXIT_CONFIG, EXIT_MODULE, EXIT_OK, main
from nearcrit.config_model import read_edges


@pytest.fixture
def files(tmp_path):
    (tmp_path / "deg.csv").write_text("k,n_k\n1,730\n3,270\n")
    (tmp_path / "pmf.csv").write_text("k,p\n0,0.05\n1,0.85\n2,0.1\n")
    (tmp_path / "exp.ini").write_text(
        "[experiment]\nn_grid = 100, 200\nreplicates = 2\nseed = 3\n\n[family]\ntype = two-atom\neps = 0.05\n")
    return tmp_path


def test_stats(files, capsys):
    assert main(["stats", str(files / "deg.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mu: 1.54" in out and "regime:" in out


def test_survival(files, capsys):
    assert main(["survival", str(files / "pmf.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    rho = float(next(line for line in out.splitlines() if line.startswith("rho:")).split()[1])
    assert rho == pytest.approx(0.5, abs=1e-12)


def test_generate_seed_flag_overrides_env(files, monkeypatch):
    monkeypatch.setenv("NEARCRIT_SEED", "99")
    a, b, c = (files / x for x in ("a.csv", "b.csv", "c.csv"))
    assert main(["generate", str(files / "deg.csv"), "--seed", "4", "--out", str(a)]) == EXIT_OK
    assert main(["generate", str(files / "deg.csv"), "--out", str(b)]) == EXIT_OK
    assert main(["generate", str(files / "deg.csv"), "--seed", "99", "--out", str(c)]) == EXIT_OK
    assert read_edges(a)[1]["seed"] == "4"
    assert b.read_text() == c.read_text()
    assert a.read_text() != b.read_text()


def test_generate_simple(files):
    out = files / "s.csv"
    assert main(["generate", str(files / "deg.csv"), "--seed", "1", "--simple", "--out", str(out)]) == EXIT_OK
    assert "attempts" in read_edges(out)[1]


def test_explore_writes_trace(files, capsys):
    trace = files / "trace.csv"
    assert main(["explore", str(files / "deg.csv"), "--seed", "2", "--trace-out", str(trace)]) == EXIT_OK
    assert trace.read_text().startswith("t,S,A,V,L,N,event_kind")
    assert "v1:" in capsys.readouterr().out


def test_experiment_is_reproducible(files):
    a, b = files / "a.csv", files / "b.csv"
    assert main(["experiment", str(files / "exp.ini"), "--out", str(a)]) == EXIT_OK
    assert main(["experiment", str(files / "exp.ini"), "--threads", "2", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert len([x for x in a.read_text().splitlines() if x and not x.startswith("#")]) == 1 + 4


def test_exit_codes(files):
    bad = files / "bad.ini"
    bad.write_text("[experiment]\nn_grid = 10\n")
    assert main(["experiment", str(bad)]) == EXIT_CONFIG
    assert main(["stats", str(files / "missing.csv")]) == EXIT_CONFIG
    (files / "twos.csv").write_text("k,n_k\n2,1\n")
    assert main(["generate", str(files / "twos.csv"), "--seed", "1", "--simple", "--max-attempts", "3",
                 "--out", str(files / "x.csv")]) == EXIT_MODULE


def test_module_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "nearcrit", "survival", str(files / "pmf.csv")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "rho:" in res.stdout
    res = subprocess.run([sys.executable, "-m", "nearcrit", "nonsense"], capture_output=True, text=True)
    assert res.returncode == 2
