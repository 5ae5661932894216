"""Command-line entry point: config parsing, dispatch, CSV/report emission.

Usage:
    granular-kinetics <subcommand> [--config PATH] [--set key=value ...] [--out DIR]

Subcommands: selftest, simulate, haff, profile, eigen, sweep, lyapunov,
energy-ode. Exit codes: 0 pass, 1 fail criterion, 2 usage error, 3 runtime
error.

Configuration is a flat `key = value` text format with `#` comments; every
key has a documented default and unknown keys are errors. The environment
variable GK_THREADS overrides the `threads` key. All randomness flows from
the single `seed` key.

Output files (written atomically: temp file + rename):
  * <name>_trace.csv   raw diagnostics rows, long format with replica column,
    header: t,rho,px,py,pz,energy,theta,m_half,m_32,m_2,m_3,de_est,de_se,
    rel_entropy,l1_dist,collisions,replica (17 significant digits)
  * <name>_report.json flat key/value summary of the experiment report
  * <name>_config.txt  the fully resolved configuration echo
  * experiment-specific tables: profile_hist.csv (r_lo,r_hi,mass,ref_mass),
    sweep_summary.csv (alpha,distance,floor,corrected,theta_inf),
    eigen_resid.csv (t,replica,energy,resid), lyap_median.csv (t,h1_median),
    lyap_h1.csv (t,replica,h1), ode_check.csv (t,energy,deriv,predicted)
"""

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace

import numpy as np

from .dsmc import DsmcConfig, replica_rng, run
from .errors import ConfigError
from .experiments import EXPERIMENTS, ExperimentConfig, predicted_plateau_theta
from .gaussian import (MaxwellianParams, format_selftest, sample_maxwellian,
                       selftest)
from .kernel import CrossSection

CSV_COLUMNS = ("t", "rho", "px", "py", "pz", "energy", "theta", "m_half",
               "m_32", "m_2", "m_3", "de_est", "de_se", "rel_entropy",
               "l1_dist", "collisions", "replica")

SUBCOMMANDS = ("selftest", "simulate", "haff", "profile", "eigen", "sweep",
               "lyapunov", "energy-ode")


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _parse_float_list(s: str):
    return tuple(float(part) for part in s.split(",") if part.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ",".join(format(v, ".17g") for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (one value per documented key)."""

    experiment: str = "profile"
    dimension: int = 3
    alpha: float = 0.99
    rho: float = 1.0
    b0prime: float = 1.0
    cross_section: str = "constant"
    cross_section_table: str = ""
    particle_count: int = 100_000
    dt: float = 0.0                      # 0 = automatic (rate-limited)
    majorant_refresh_interval: int = 64
    seed: int = 1
    mode: str = "rescaled"
    recenter_momentum: str = "auto"      # auto | true | false
    replicas: int = 2
    threads: int = 1
    bins: int = 64
    pair_samples: int = 4096
    initial_theta: float = 0.0           # 0 = automatic per experiment
    schedule_kind: str = "linear"        # linear | geometric
    t_start: float = 0.1
    t_end: float = 10.0
    records: int = 20
    start_factor: float = 1.25
    settle_efolds: float = 2.8
    min_settle_time: float = 30.0
    window_efolds: float = 0.8
    min_window_time: float = 150.0
    record_spacing: float = 2.0
    plateau_drift_floor: float = 0.005
    haff_window_lo: float = 2.0
    haff_window_hi: float = 20.0
    haff_records: int = 48
    eigen_start_factor: float = 1.3
    eigen_window_hi: float = 0.8
    eigen_window_lo: float = 0.2
    eigen_records: int = 80
    sweep_alphas: tuple = (0.9, 0.95, 0.99)
    lyap_start_factor: float = 4.0
    lyap_increase_budget: float = 0.05
    lyap_noise_sigmas: float = 2.0
    ode_tolerance: float = 0.15
    ode_records: int = 32
    bootstrap_resamples: int = 200


_PARSERS = {int: int, float: float, str: str.strip, bool: _parse_bool,
            tuple: _parse_float_list}

_CONSTRAINTS = {
    "alpha": (lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]"),
    "rho": (lambda v: v > 0, "must be positive"),
    "b0prime": (lambda v: v > 0, "must be positive"),
    "dimension": (lambda v: v >= 2, "must be >= 2"),
    "particle_count": (lambda v: v >= 2, "must be >= 2"),
    "dt": (lambda v: v >= 0, "must be >= 0 (0 = automatic)"),
    "majorant_refresh_interval": (lambda v: v >= 1, "must be >= 1"),
    "mode": (lambda v: v in ("original", "rescaled"),
             "must be 'original' or 'rescaled'"),
    "recenter_momentum": (lambda v: v in ("auto", "true", "false"),
                          "must be 'auto', 'true' or 'false'"),
    "cross_section": (lambda v: v in ("constant", "tabulated"),
                      "must be 'constant' or 'tabulated'"),
    "schedule_kind": (lambda v: v in ("linear", "geometric"),
                      "must be 'linear' or 'geometric'"),
    "replicas": (lambda v: v >= 1, "must be >= 1"),
    "threads": (lambda v: v >= 1, "must be >= 1"),
    "bins": (lambda v: v >= 2, "must be >= 2"),
    "pair_samples": (lambda v: v >= 100, "must be >= 100"),
    "records": (lambda v: v >= 2, "must be >= 2"),
    "t_end": (lambda v: v > 0, "must be positive"),
    "t_start": (lambda v: v > 0, "must be positive"),
    "initial_theta": (lambda v: v >= 0, "must be >= 0 (0 = automatic)"),
    "sweep_alphas": (lambda v: len(v) >= 2 and all(0 < a < 1 for a in v)
                     and all(b > a for a, b in zip(v, v[1:])),
                     "must be an increasing list of values in (0, 1)"),
    "experiment": (lambda v: v in SUBCOMMANDS,
                   f"must be one of {', '.join(SUBCOMMANDS)}"),
}

_FIELD_TYPES = {f.name: (tuple if f.name == "sweep_alphas" else f.type)
                for f in fields(RunConfig)}
_TYPE_BY_NAME = {"str": str, "int": int, "float": float, "tuple": tuple}


def _coerce(key: str, raw: str, where: str):
    ftype = _FIELD_TYPES.get(key)
    if ftype is None:
        raise ConfigError(f"unknown key '{key}' {where}")
    if isinstance(ftype, str):
        ftype = _TYPE_BY_NAME[ftype]
    try:
        value = _PARSERS[ftype](raw)
    except (ValueError, TypeError):
        raise ConfigError(
            f"key '{key}' {where}: cannot parse {raw!r} as {ftype.__name__}")
    if key in _CONSTRAINTS:
        ok, msg = _CONSTRAINTS[key]
        if not ok(value):
            raise ConfigError(f"key '{key}' {where}: {msg}")
    return value


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse the flat key = value format; unknown keys and bad values raise.

    overrides are extra "key=value" strings (from --set) applied on top.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        values[key] = _coerce(key, raw.strip(), f"(line {lineno})")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        values[key] = _coerce(key, raw.strip(), "(--set)")
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    """Resolved-config echo; parse_config(format_config(c)) == c."""
    lines = [f"{f.name} = {_fmt(getattr(cfg, f.name))}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def load_cross_section(cfg: RunConfig) -> CrossSection:
    if cfg.cross_section == "constant":
        if cfg.dimension == 3:
            return CrossSection.constant_3d(cfg.b0prime)
        return CrossSection.tabulated([-1.0, 1.0], [cfg.b0prime, cfg.b0prime],
                                      dimension=cfg.dimension)
    if not cfg.cross_section_table:
        raise ConfigError("key 'cross_section_table': required for tabulated "
                          "cross-sections")
    data = np.loadtxt(cfg.cross_section_table, delimiter=",", ndmin=2)
    return CrossSection.tabulated(data[:, 0], data[:, 1], dimension=cfg.dimension)


def experiment_config(cfg: RunConfig) -> ExperimentConfig:
    shared = {f.name for f in fields(ExperimentConfig)} \
        & {f.name for f in fields(RunConfig)}
    return ExperimentConfig(**{name: getattr(cfg, name) for name in shared})


# ---------------------------------------------------------------------------
# serialization


def write_atomic(path: str, text: str):
    """Write via a temp file and rename; never leaves a truncated file."""
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-",
                               suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_to_csv(records) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        p = r.momentum
        row = (r.t, r.rho, p[0], p[1], p[2] if p.size > 2 else 0.0, r.energy,
               r.theta, r.m_half, r.m_32, r.m_2, r.m_3, r.de_est, r.de_se,
               r.rel_entropy, r.l1_dist)
        lines.append(",".join(format(v, ".17g") for v in row)
                     + f",{r.collisions},{r.replica}")
    return "\n".join(lines) + "\n"


def table_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(format(float(v), ".17g"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def report_to_json(report) -> str:
    flat = report.flat()
    safe = {}
    for key, val in flat.items():
        if isinstance(val, (np.floating, np.integer, np.bool_)):
            val = val.item()
        elif isinstance(val, (list, tuple)):
            val = [v.item() if isinstance(v, np.generic) else v for v in val]
        safe[key] = val
    return json.dumps(safe, indent=2, sort_keys=True) + "\n"


def _write_experiment_outputs(report, out_dir: str, cfg: RunConfig):
    name = report.name.replace("-", "_")
    art = report.artifacts
    if art.get("traces"):
        write_atomic(os.path.join(out_dir, f"{name}_trace.csv"),
                     records_to_csv(art["traces"]))
    if report.name == "profile" and "histogram" in art:
        write_atomic(os.path.join(out_dir, "profile_hist.csv"),
                     table_to_csv(("r_lo", "r_hi", "mass", "ref_mass"),
                                  art["histogram"]))
    if report.name == "sweep" and "rows" in art:
        rows = [(r["alpha"], r["distance"], r["floor"], r["corrected"],
                 r["theta_inf"]) for r in art["rows"]]
        write_atomic(os.path.join(out_dir, "sweep_summary.csv"),
                     table_to_csv(("alpha", "distance", "floor", "corrected",
                                   "theta_inf"), rows))
    if report.name == "eigenvalue":
        rows = []
        curves = art["energy_curves"]
        for rep_idx in range(curves.shape[0]):
            for t, energy in zip(art["schedule"], curves[rep_idx]):
                rows.append((t, rep_idx, energy, energy - art["e_inf"]))
        write_atomic(os.path.join(out_dir, "eigen_resid.csv"),
                     table_to_csv(("t", "replica", "energy", "resid"), rows))
    if report.name == "lyapunov":
        write_atomic(os.path.join(out_dir, "lyap_median.csv"),
                     table_to_csv(("t", "h1_median"),
                                  list(zip(art["schedule"], art["median_h1"]))))
        rows = [(t, rep_idx, art["h1"][rep_idx, k])
                for rep_idx in range(art["h1"].shape[0])
                for k, t in enumerate(art["schedule"])]
        write_atomic(os.path.join(out_dir, "lyap_h1.csv"),
                     table_to_csv(("t", "replica", "h1"), rows))
    if report.name == "energy-ode":
        rows = list(zip(art["schedule"][1:-1], art["mean_energy"][1:-1],
                        art["deriv"], art["pred"]))
        write_atomic(os.path.join(out_dir, "ode_check.csv"),
                     table_to_csv(("t", "energy", "deriv", "predicted"), rows))
    write_atomic(os.path.join(out_dir, f"{name}_report.json"),
                 report_to_json(report))
    write_atomic(os.path.join(out_dir, f"{name}_config.txt"), format_config(cfg))


def _simulate(cfg: RunConfig, out_dir: str) -> int:
    cs = load_cross_section(cfg)
    rp = experiment_config(cfg).restitution()
    if cfg.schedule_kind == "linear":
        schedule = np.linspace(cfg.t_end / cfg.records, cfg.t_end, cfg.records)
    else:
        schedule = np.geomspace(cfg.t_start, cfg.t_end, cfg.records)
    theta0 = cfg.initial_theta
    if theta0 == 0.0:
        theta0 = 1.0 if cfg.mode == "original" \
            else predicted_plateau_theta(experiment_config(cfg))
    recenter = None if cfg.recenter_momentum == "auto" \
        else cfg.recenter_momentum == "true"
    dcfg = DsmcConfig(particle_count=cfg.particle_count,
                      dt=cfg.dt if cfg.dt > 0 else 1.0,
                      majorant_refresh_interval=cfg.majorant_refresh_interval,
                      seed=cfg.seed, mode=cfg.mode, recenter_momentum=recenter)
    traces = []
    for rep in range(cfg.replicas):
        rng = replica_rng(cfg.seed, rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta0, cfg.dimension),
            cfg.particle_count, rng, zero_momentum=True)
        res = run(e, dcfg, rp, cs, schedule, rng=rng,
                  pair_samples=cfg.pair_samples, bins=cfg.bins, replica=rep,
                  adaptive_dt=cfg.dt == 0.0)
        traces.extend(res.records)
    write_atomic(os.path.join(out_dir, "simulate_trace.csv"),
                 records_to_csv(traces))
    write_atomic(os.path.join(out_dir, "simulate_config.txt"),
                 format_config(cfg))
    return 0


def dispatch(cfg: RunConfig, out_dir: str = ".") -> int:
    """Run the configured subcommand; returns the process exit code."""
    if cfg.experiment == "selftest":
        rows = selftest()
        print(format_selftest(rows))
        return 0 if all(r["ok"] for r in rows) else 1
    if cfg.experiment == "simulate":
        return _simulate(cfg, out_dir)
    runner = EXPERIMENTS.get(cfg.experiment)
    if runner is None:
        print(f"unknown experiment {cfg.experiment!r}", file=sys.stderr)
        return 2
    report = runner(experiment_config(cfg))
    _write_experiment_outputs(report, out_dir, cfg)
    print(f"{report.name}: {report.status}")
    for key, val in sorted(report.fitted.items()):
        print(f"  {key} = {val}")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="granular-kinetics",
        description="DSMC solver and verification harness for the freely "
                    "cooling inelastic hard-sphere gas")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="flat key=value file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--out", default=".", help="output directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        text = ""
        if args.config is not None:
            with open(args.config, "r", encoding="utf-8") as handle:
                text = handle.read()
        cfg = parse_config(text, overrides=args.overrides)
        cfg = replace(cfg, experiment=args.subcommand)
        env_threads = os.environ.get("GK_THREADS")
        if env_threads is not None:
            cfg = replace(cfg, threads=_coerce("threads", env_threads,
                                               "(GK_THREADS)"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 3

    try:
        return dispatch(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 3
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
