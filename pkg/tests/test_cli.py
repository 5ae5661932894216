"""Config parsing, CSV schema, atomic writes, dispatch exit codes."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from granular_kinetics.cli import (CSV_COLUMNS, RunConfig, dispatch,
                                   experiment_config, format_config,
                                   load_cross_section, main, parse_config,
                                   records_to_csv, write_atomic)
from granular_kinetics.ensemble import DiagnosticsRecord
from granular_kinetics.errors import ConfigError


def test_empty_config_gives_documented_defaults():
    cfg = parse_config("")
    assert cfg.dimension == 3
    assert cfg.alpha == 0.99
    assert cfg.rho == 1.0
    assert cfg.b0prime == 1.0
    assert cfg.particle_count == 100_000
    assert cfg.seed == 1


def test_parse_values_comments_and_overrides():
    text = """
    # a comment
    alpha = 0.95   # trailing comment
    particle_count = 5000
    sweep_alphas = 0.9, 0.95, 0.99
    mode = original
    """
    cfg = parse_config(text, overrides=["seed=42", "rho=2.0"])
    assert cfg.alpha == 0.95
    assert cfg.particle_count == 5000
    assert cfg.sweep_alphas == (0.9, 0.95, 0.99)
    assert cfg.mode == "original"
    assert cfg.seed == 42 and cfg.rho == 2.0


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"unknown key 'alhpa'.*line 2"):
        parse_config("\nalhpa = 0.5\n")


def test_constraint_violation_names_key():
    with pytest.raises(ConfigError, match=r"'alpha'.*\[0, 1\]"):
        parse_config("alpha = 1.5\n")
    with pytest.raises(ConfigError, match="'particle_count'"):
        parse_config("particle_count = 1\n")
    with pytest.raises(ConfigError, match="'mode'"):
        parse_config("mode = sideways\n")


def test_type_mismatch_names_key():
    with pytest.raises(ConfigError, match="'particle_count'"):
        parse_config("particle_count = many\n")


def test_config_round_trip():
    cfg = parse_config("alpha = 0.931\nreplicas = 7\nsweep_alphas = 0.8,0.9\n")
    assert parse_config(format_config(cfg)) == cfg
    assert parse_config(format_config(RunConfig())) == RunConfig()


def test_experiment_config_mapping():
    cfg = parse_config("alpha = 0.9\nparticle_count = 1234\nbins = 32\n")
    ecfg = experiment_config(cfg)
    assert ecfg.alpha == 0.9 and ecfg.particle_count == 1234 and ecfg.bins == 32


def test_load_cross_section_tabulated(tmp_path):
    table = tmp_path / "b.csv"
    table.write_text("-1.0,0.5\n0.0,1.0\n1.0,1.5\n")
    cfg = parse_config(f"cross_section = tabulated\n"
                       f"cross_section_table = {table}\n")
    cs = load_cross_section(cfg)
    assert not cs.is_constant
    assert cs.evaluate(0.0) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        load_cross_section(parse_config("cross_section = tabulated\n"))


def sample_record(replica=0):
    return DiagnosticsRecord(
        t=0.5, rho=1.0, momentum=np.array([0.0, 1e-18, -2e-18]), energy=3.0,
        theta=1.0, m_half=1.6, m_32=6.4, m_2=15.0, m_3=105.0, de_est=28.4,
        de_se=0.3, rel_entropy=1e-4, l1_dist=0.01, collisions=12345,
        replica=replica)


def test_csv_schema_and_precision():
    text = records_to_csv([sample_record(0), sample_record(1)])
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3
    cells = lines[1].split(",")
    assert len(cells) == len(CSV_COLUMNS)
    assert cells[-2] == "12345" and cells[-1] == "0"
    # 17 significant digits round-trip float64 exactly
    assert float(cells[5]) == 3.0
    value = 0.1234567890123456789
    assert float(format(value, ".17g")) == value


def test_write_atomic_never_truncates(tmp_path):
    path = tmp_path / "out" / "x.csv"
    write_atomic(str(path), "hello\n")
    assert path.read_text() == "hello\n"
    write_atomic(str(path), "world\n")
    assert path.read_text() == "world\n"
    leftovers = [p for p in os.listdir(tmp_path / "out") if p.startswith(".tmp")]
    assert leftovers == []


def test_dispatch_selftest_exit_zero(capsys):
    assert dispatch(parse_config("", overrides=["experiment=selftest"])) == 0
    out = capsys.readouterr().out
    assert "pass" in out and "FAIL" not in out


def test_dispatch_simulate_writes_trace(tmp_path):
    cfg = parse_config(
        "particle_count = 600\nreplicas = 2\nrecords = 3\nt_end = 0.5\n"
        "mode = rescaled\nalpha = 0.95\npair_samples = 200\n",
        overrides=["experiment=simulate"])
    assert dispatch(cfg, out_dir=str(tmp_path)) == 0
    trace = (tmp_path / "simulate_trace.csv").read_text()
    lines = trace.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 3
    echo = (tmp_path / "simulate_config.txt").read_text()
    assert parse_config(echo).particle_count == 600


def test_main_usage_errors():
    assert main(["bogus-subcommand"]) == 2
    assert main(["simulate", "--config", "/nonexistent/path.cfg"]) == 3
    assert main(["simulate", "--set", "alpha=2.0"]) == 2


def test_gk_threads_env_override(tmp_path, monkeypatch):
    captured = {}

    def fake_dispatch(cfg, out_dir="."):
        captured["threads"] = cfg.threads
        return 0

    monkeypatch.setattr("granular_kinetics.cli.dispatch", fake_dispatch)
    monkeypatch.setenv("GK_THREADS", "7")
    assert main(["selftest"]) == 0
    assert captured["threads"] == 7
    monkeypatch.setenv("GK_THREADS", "zero")
    assert main(["selftest"]) == 2


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "granular_kinetics.cli", *args],
                          capture_output=True, text=True)


def test_cli_process_selftest():
    proc = run_cli("selftest")
    assert proc.returncode == 0
    assert "pass" in proc.stdout


def test_cli_process_unknown_subcommand():
    proc = run_cli("frobnicate")
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()


def test_experiment_table_writers(tmp_path):
    # exercise the eigen / lyapunov / energy-ode table emitters directly
    from granular_kinetics.cli import _write_experiment_outputs
    from granular_kinetics.experiments import ExperimentReport

    cfg = parse_config("")
    base = dict(config={}, fitted={}, target={}, passed=True, status="pass",
                wall_clock=0.1, replicas=2)
    sched = np.array([1.0, 2.0, 3.0])
    curves = np.array([[3.0, 2.5, 2.2], [3.1, 2.6, 2.1]])
    _write_experiment_outputs(ExperimentReport(
        name="eigenvalue", artifacts={"energy_curves": curves,
                                      "schedule": sched, "e_inf": 2.0},
        **base), str(tmp_path), cfg)
    text = (tmp_path / "eigen_resid.csv").read_text()
    assert text.startswith("t,replica,energy,resid\n")
    assert len(text.strip().split("\n")) == 1 + 6

    h1 = np.array([[0.5, 0.3, 0.2], [0.6, 0.35, 0.25]])
    _write_experiment_outputs(ExperimentReport(
        name="lyapunov", artifacts={"schedule": sched, "h1": h1,
                                    "median_h1": np.median(h1, axis=0)},
        **base), str(tmp_path), cfg)
    assert (tmp_path / "lyap_median.csv").read_text().startswith("t,h1_median\n")
    assert (tmp_path / "lyap_h1.csv").read_text().startswith("t,replica,h1\n")

    _write_experiment_outputs(ExperimentReport(
        name="energy-ode", artifacts={"schedule": sched,
                                      "mean_energy": curves.mean(axis=0),
                                      "deriv": np.array([-0.4]),
                                      "pred": np.array([-0.38])},
        **base), str(tmp_path), cfg)
    assert (tmp_path / "ode_check.csv").read_text().startswith(
        "t,energy,deriv,predicted\n")
    assert (tmp_path / "energy_ode_report.json").exists()


def test_dispatch_experiment_writes_report(tmp_path):
    cfg = parse_config(
        "particle_count = 1500\nreplicas = 2\nalpha = 0.9\nbins = 32\n"
        "min_window_time = 40\nmin_settle_time = 20\nrecord_spacing = 1.0\n"
        "pair_samples = 200\nplateau_drift_floor = 0.02\n",
        overrides=["experiment=profile"])
    code = dispatch(cfg, out_dir=str(tmp_path))
    report = json.loads((tmp_path / "profile_report.json").read_text())
    assert report["name"] == "profile"
    assert (tmp_path / "profile_trace.csv").exists()
    assert (tmp_path / "profile_hist.csv").exists()
    assert (tmp_path / "profile_config.txt").exists()
    assert code in (0, 1)
    assert (code == 0) == report["passed"]
