import tomllib

import numpy as np
import pandas as pd
import scipy.io

from iga_spectra.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, SPECTRA_COLUMNS, main
from iga_spectra.config import parse_config

INTERVAL = """
[experiment]
domain = "interval"
targets = ["A"]
source = "{source}"
scheme = "{scheme}"

[grid]
p = [{p}]
n = [{n}]
k = ["{k}"]
factor = [4.0]
"""


def write_config(tmp_path, name="experiment.toml", source="zero", scheme="greville", p="2", n="10", k="c1", extra=""):
    path = tmp_path / name
    path.write_text(INTERVAL.format(source=source, scheme=scheme, p=p, n=n, k=k) + extra)
    return path


def header_text(path):
    lines = []
    for line in path.read_text().splitlines():
        if not line.startswith("#"):
            break
        lines.append(line[2:])
    return "\n".join(lines)


def test_points_sc(tmp_path):
    assert main(["points", "--scheme", "sc", "--p", "4", "--n", "2", "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "points_sc_p4.csv", comment="#")
    assert len(frame) == 5
    assert np.allclose(frame["xi_1"], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)


def test_points_greville_by_count(tmp_path):
    assert main(["points", "--scheme", "greville", "--p", "2", "--m", "4", "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "points_greville_p2.csv", comment="#")
    assert np.allclose(frame["xi_1"], [0.0, 0.25, 0.75, 1.0], atol=1e-15)


def test_points_tensorized(tmp_path):
    args = ["points", "--scheme", "cg", "--p", "3", "--n", "4", "--dim", "2", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    frame = pd.read_csv(tmp_path / "points_cg_p3.csv", comment="#")
    assert list(frame.columns) == ["index", "xi_1", "xi_2", "interior"]
    assert len(frame) == 16


def test_points_unsupported_degree(tmp_path, capsys):
    assert main(["points", "--scheme", "sc", "--p", "8", "--n", "2", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "invalid input" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["spectra", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["spectra", "--config", str(tmp_path / "nowhere.toml")]) == EXIT_CONFIG


def test_missing_key(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text('[experiment]\ndomain = "interval"\n\n[grid]\np = [2]\n')
    assert main(["spectra", "--config", str(path)]) == EXIT_CONFIG
    assert "grid.n" in capsys.readouterr().err


def test_invalid_thread_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IGA_SPECTRA_THREADS", "many")
    assert main(["spectra", "--config", str(write_config(tmp_path)), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_spectra(tmp_path, monkeypatch):
    monkeypatch.setenv("IGA_SPECTRA_THREADS", "2")
    out = tmp_path / "out"
    assert main(["spectra", "--config", str(write_config(tmp_path)), "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out / "spectra.csv", comment="#")
    assert tuple(frame.columns) == SPECTRA_COLUMNS
    assert len(frame) == 1
    assert frame["status"].tolist() == ["ok"]
    assert frame["dof"].tolist() == [10]
    assert frame["cond"].iloc[0] > 1.0
    echoed = parse_config(tomllib.loads(header_text(out / "spectra.csv")))
    assert echoed.threads == 2
    assert echoed.output == str(out)


def test_assemble(tmp_path):
    out = tmp_path / "out"
    assert main(["assemble", "--config", str(write_config(tmp_path, source="polynomial")), "--out", str(out)]) == EXIT_OK
    tag = "interval_p2_n10_k1_greville_f4"
    A = scipy.io.mmread(str(out / f"A_{tag}.mtx"))
    M = scipy.io.mmread(str(out / f"M_{tag}.mtx"))
    assert A.shape == M.shape == (46, 10)
    b = pd.read_csv(out / f"b_{tag}.csv", comment="#")
    assert np.allclose(b["b"], 2.0, atol=1e-12)
    pattern = pd.read_csv(out / f"AtA_pattern_{tag}.csv", comment="#")
    assert len(pattern) > 0


def test_solve(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, source="polynomial", p="3", n="6", k="cp-1")
    assert main(["solve", "--config", str(path), "--out", str(out), "--samples", "7"]) == EXIT_OK
    tag = "interval_p3_n6_k2_greville_f4"
    samples = pd.read_csv(out / f"samples_{tag}.csv", comment="#")
    assert len(samples) == 7
    assert np.allclose(samples["u_h"], samples["xi_1"] * (1.0 - samples["xi_1"]), atol=1e-10)
    assert (out / f"solution_{tag}.csv").is_file()
    assert "max error" in capsys.readouterr().out


def test_numerical_failure_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, source="sine", scheme="cg", p="3", n="4", k="cp-1")
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert "RankDeficiencyError" in err
    assert "failing grid point" in err
    assert '[experiment]' in err


def test_sweep_with_fits(tmp_path):
    fit = '\n[[fit]]\nlabel = "cond_h"\nx = "h"\ny = "cond"\ntarget = "A"\nlaw = "lsq.cond.A_1"\n'
    path = write_config(tmp_path, p="2", n="10, 20, 40", k="c1", extra=fit)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(path), "--out", str(out), "--threads", "2"]) == EXIT_OK

    sweep = pd.read_csv(out / "sweep.csv", comment="#")
    assert len(sweep) == 3
    assert (sweep["status"] == "ok").all()
    echoed = parse_config(tomllib.loads(header_text(out / "sweep.csv")))
    assert echoed.n == (10, 20, 40)
    assert echoed.fits[0].law == "lsq.cond.A_1"

    fits = pd.read_csv(out / "fits.csv", comment="#")
    assert len(fits) == 1
    assert fits["n_used"].iloc[0] == 3
    series = sorted(p.name for p in (out / "series").iterdir())
    assert any(name.endswith(".data.csv") for name in series)
    assert any(name.endswith(".fit.csv") for name in series)
    assert any(name.endswith(".law.csv") for name in series)
