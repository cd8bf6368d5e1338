import csv
import io
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from zeno_metrology import cli
from zeno_metrology.cli import ConfigError, format_config, main, parse_config, run_subcommand
from zeno_metrology.dynamics import SolverDivergence


@pytest.fixture(autouse=True)
def no_thread_override(monkeypatch):
    monkeypatch.delenv("ZM_THREADS", raising=False)


def read_blocks(text):
    return [list(csv.reader(io.StringIO(block))) for block in text.split("\n\n")]


def test_defaults():
    cfg = parse_config([])
    assert cfg.gamma == math.pi and cfg.eta == 0.02 and cfg.omega_c == 300.0 and cfg.s == 1.0
    assert cfg.N == 100.0 and cfg.beta is None and cfg.h is None and cfg.t_max == 100.0
    assert cfg.record.state().beta == pytest.approx(0.05)
    assert cfg.settings.step(cfg.record) == pytest.approx(0.2 / 300)


def test_fig1_flags():
    cfg = parse_config("--gamma 3.14159265 --eta 0.02 --omega-c 300 --s 1".split())
    assert cfg.gamma == 3.14159265 and cfg.omega_c == 300.0
    assert parse_config(["--omega_c", "250"]).omega_c == 250.0


@pytest.mark.parametrize(
    "tokens,needle",
    [
        (["--beta", "0.7"], "beta must lie in [0, 0.5)"),
        (["--beta", "0.5"], "beta"),
        (["--eta", "abc"], "eta"),
        (["--omega-c", "-3"], "omega_c"),
        (["--gamma", "-2"], "gamma"),
        (["--foo", "1"], "--foo"),
        (["--digits", "40"], "digits"),
        (["--values", "3,2,1"], "increasing"),
    ],
)
def test_rejections(tokens, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(tokens)
    assert needle in str(err.value)


def test_config_file_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# Fig. 1 family\neta = 0.03\nomega-c = 250  # cutoff\n\nN = 400\n")
    cfg = parse_config(["--config", str(path), "--eta", "0.04"])
    assert (cfg.eta, cfg.omega_c, cfg.N) == (0.04, 250.0, 400.0)
    assert parse_config([], file_text="s = 0.5").s == 0.5


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match=r"run.cfg:2: unknown key 'colour'"):
        parse_config([], file_text="eta = 0.1\ncolour = red\n", file_name="run.cfg")
    with pytest.raises(ConfigError, match=r"cfg:1"):
        parse_config([], file_text="eta = x", file_name="cfg")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config([], file_text="eta 0.1")
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(["--config", str(tmp_path / "missing.cfg")])


@pytest.mark.parametrize(
    "tokens",
    [
        [],
        ["--beta", "0.1234567890123", "--h", "0.001", "--values", "0.1,0.2,0.30000000000000004"],
        ["--values", "log:10:1e4:7", "--axis", "N", "--output", "out.csv", "--digits", "9"],
        ["--gamma", "0.1", "--phi-coh", "-0.3", "--phi-sq", "2.5e-17", "--stride", "4", "--y-samples", "11"],
    ],
)
def test_config_round_trip(tokens):
    cfg = parse_config(tokens)
    assert parse_config([], file_text=format_config(cfg)) == cfg


def test_thread_override(monkeypatch):
    monkeypatch.setenv("ZM_THREADS", "3")
    assert parse_config(["--threads", "7"]).threads == 3
    monkeypatch.setenv("ZM_THREADS", "0")
    with pytest.raises(ConfigError, match="ZM_THREADS"):
        parse_config([])


def test_spectrum_output():
    text = run_subcommand("spectrum", parse_config([]))
    (header, row), = read_blocks(text)
    assert header == ["exists", "varpi_b", "Z", "y0", "residual"]
    assert row[0] == "1" and float(row[4]) < 1e-10
    assert float(row[3]) == pytest.approx(1 + math.pi - 6.0, rel=1e-12)
    absent = read_blocks(run_subcommand("spectrum", parse_config(["--omega-c", "100"])))[0][1]
    assert absent[:3] == ["0", "nan", "nan"]
    blocks = read_blocks(run_subcommand("spectrum", parse_config(["--y-samples", "5"])))
    assert blocks[1][0] == ["varpi", "y"] and len(blocks[1]) == 6


def test_dynamics_output_noiseless():
    text = run_subcommand("dynamics", parse_config(["--eta", "0", "--t-max", "5", "--h", "0.01"]))
    rows = read_blocks(text)[0]
    assert rows[0] == ["t", "re_c", "im_c", "abs_c"]
    assert len(rows) == 502
    assert max(abs(float(r[3]) - 1) for r in rows[1:]) < 1e-10
    assert "\r" not in text and text.endswith("\n")
    for r in rows[1:4]:
        assert all(len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17 for v in r)


def test_precision_output():
    text = run_subcommand("precision", parse_config(["--omega-c", "50", "--t-max", "8", "--stride", "10"]))
    series, footer = read_blocks(text)
    assert series[0] == ["t", "mean_M", "delta_M", "delta_gamma"]
    assert series[1][3] == "nan"
    assert footer[0] == ["t_min", "delta_gamma_min", "predicted_delta_gamma"]
    assert len(footer) > 2
    assert all(float(r[1]) > 0 for r in footer[1:])


def test_sweep_output():
    cfg = parse_config(["--axis", "eta", "--values", "0.005,0.02", "--t-max", "10", "--threads", "1"])
    rows = read_blocks(run_subcommand("sweep", cfg))[0]
    assert rows[0][0] == "eta" and len(rows) == 3
    assert [r[1] for r in rows[1:]] == ["0", "1"]
    with pytest.raises(ConfigError):
        run_subcommand("sweep", parse_config([]))


def test_main_exit_codes(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--output", str(out)]) == 0
    assert out.read_text().startswith("exists,varpi_b")
    assert main(["spectrum", "--beta", "0.7"]) == 2
    assert main(["spectrum", "--foo", "1"]) == 2
    assert main(["bogus"]) == 2
    assert main(["reproduce"]) == 2
    assert main(["reproduce", "fig9"]) == 2
    assert main([]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 5 and all(line.startswith("error:") for line in err)
    assert main(["--help"]) == 0
    assert "omega-c" in capsys.readouterr().out


def test_failure_leaves_no_file(tmp_path, monkeypatch, capsys):
    def diverge(*args, **kwargs):
        raise SolverDivergence(12, 0.3)

    monkeypatch.setattr(cli, "solve_c", diverge)
    out = tmp_path / "dyn.csv"
    assert main(["dynamics", "--output", str(out)]) == 3
    assert not out.exists() and list(tmp_path.iterdir()) == []
    assert "step 12" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    assert main(["spectrum", "--output", str(tmp_path / "missing" / "x.csv")]) == 2
    assert capsys.readouterr().err.startswith("error: cannot write output")


def test_interrupted_write_is_cleaned_up(tmp_path, monkeypatch):
    out = tmp_path / "x.csv"
    out.write_text("old\n")

    def broken_replace(src, dst):
        raise OSError("disk gone")

    monkeypatch.setattr(cli.os, "replace", broken_replace)
    with pytest.raises(OSError):
        cli._write_atomic(str(out), "a,b\n1,2\n")
    assert out.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.csv"]


def test_save_config_echo(tmp_path):
    cfg_path = tmp_path / "echo.cfg"
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--eta", "0.03", "--output", str(out), "--save-config", str(cfg_path)]) == 0
    again = parse_config(["--config", str(cfg_path)])
    assert again == parse_config(["--eta", "0.03", "--output", str(out)])


def test_runs_are_byte_identical(tmp_path):
    args = ["dynamics", "--omega-c", "40", "--t-max", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    env = dict(os.environ, ZM_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "zeno_metrology", "spectrum", "--omega-c", "100"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("0,nan,nan,")
    bad = subprocess.run([sys.executable, "-m", "zeno_metrology", "spectrum", "--s", "0"], capture_output=True, text=True)
    assert bad.returncode == 2 and len(bad.stderr.strip().splitlines()) == 1


def test_reproduce_fig1b_transition(tmp_path):
    out = tmp_path / "fig1b.csv"
    assert main(["reproduce", "fig1b", "--t-max", "40", "--threads", "1", "--output", str(out)]) == 0
    rows = read_blocks(out.read_text())[0]
    cols = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    wc, flag = data[:, cols.index("omega_c")], data[:, cols.index("bound_state")]
    plateau, Z = data[:, cols.index("plateau_abs_c")], data[:, cols.index("Z")]
    star = (1 + math.pi) / 0.02
    assert np.all(flag[wc < star] == 0) and np.all(flag[wc > star] == 1)
    # decay slows near threshold, so only rows well below it are expected to have emptied by t = 40
    assert np.all(plateau[wc < 0.7 * star] < 0.1)
    assert np.all(np.abs(plateau[wc > 1.2 * star] / Z[wc > 1.2 * star] - 1) < 0.03)
