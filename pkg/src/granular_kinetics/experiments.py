"""Scripted studies, each mapping one quantitative prediction to a fit.

Every experiment is a pure function of its configuration: all randomness
flows from (seed, replica_index) counter-based streams, replicas run
independently (optionally on a thread pool), and the report embeds the full
configuration snapshot together with the fitted values, their bootstrap
standard errors, the target, and the pass/fail verdict. Raw diagnostics
traces and derived tables ride along in report.artifacts for the CLI to
serialize; they are not part of the report proper.

The studies:
  * haff_experiment       free-cooling temperature decay exponent and prefactor
  * profile_experiment    rescaled-mode plateau temperature and steady profile
  * eigenvalue_experiment energy-relaxation rate near the steady state
  * elastic_limit_sweep   distance of the steady profile to the limit Maxwellian
  * lyapunov_monitor      monotonicity of H1 = H(g|M[g]) + (E - E_inf)^2
  * energy_ode_check      closure of dE/dt against the Gaussian dissipation oracle
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dsmc import DsmcConfig, replica_rng, run
from .ensemble import (equal_probability_edges, l1_histogram_distance,
                       maxwellian_bin_masses, weighted_bin_masses)
from .gaussian import (MaxwellianParams, pair_moment_u3,
                       quasi_elastic_temperature, sample_maxwellian)
from .kernel import CrossSection, RestitutionParams, angular_moments


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs shared by all studies; unused fields are ignored per study."""

    experiment: str = "profile"
    dimension: int = 3
    alpha: float = 0.99
    rho: float = 1.0
    b0prime: float = 1.0
    particle_count: int = 20_000
    replicas: int = 2
    seed: int = 1
    threads: int = 1
    bins: int = 64
    pair_samples: int = 4096
    initial_theta: float = 0.0          # 0 = automatic per experiment
    # plateau machinery
    start_factor: float = 1.25
    settle_efolds: float = 2.8
    min_settle_time: float = 30.0
    window_efolds: float = 0.8
    min_window_time: float = 150.0
    record_spacing: float = 2.0
    plateau_drift_floor: float = 0.005
    # haff
    haff_window_lo: float = 2.0         # in tau*t units
    haff_window_hi: float = 20.0
    haff_records: int = 48
    # eigenvalue
    eigen_start_factor: float = 1.3
    eigen_window_hi: float = 0.8        # fit while residual in [lo, hi] * initial
    eigen_window_lo: float = 0.2
    eigen_records: int = 80
    # elastic-limit sweep
    sweep_alphas: tuple = (0.9, 0.95, 0.99)
    # lyapunov
    lyap_start_factor: float = 4.0
    lyap_increase_budget: float = 0.05
    lyap_noise_sigmas: float = 2.0
    # energy ODE
    ode_tolerance: float = 0.15
    ode_records: int = 32
    bootstrap_resamples: int = 200

    def cross_section(self) -> CrossSection:
        if self.dimension == 3:
            return CrossSection.constant_3d(self.b0prime)
        return CrossSection.tabulated([-1.0, 1.0], [self.b0prime, self.b0prime],
                                      dimension=self.dimension)

    def restitution(self, alpha=None) -> RestitutionParams:
        return RestitutionParams(alpha=self.alpha if alpha is None else alpha,
                                 rho=self.rho)


@dataclass
class ExperimentReport:
    """Outcome of one study; pass/fail depends only on (fit, target, tolerance)."""

    name: str
    config: dict
    fitted: dict
    target: dict
    passed: bool
    status: str                  # pass | fail | inconclusive
    wall_clock: float
    replicas: int
    details: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)

    def flat(self) -> dict:
        """Flatten to scalar key/value pairs for the report file."""
        out = {"name": self.name, "status": self.status,
               "passed": self.passed, "wall_clock": self.wall_clock,
               "replicas": self.replicas}
        for prefix, group in (("config", self.config), ("fit", self.fitted),
                              ("target", self.target), ("detail", self.details)):
            for key, val in group.items():
                out[f"{prefix}.{key}"] = list(val) if isinstance(val, tuple) else val
        return out


def _config_snapshot(cfg: ExperimentConfig) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in asdict(cfg).items()}


def predicted_plateau_theta(cfg: ExperimentConfig, alpha=None) -> float:
    """Quasi-elastic plateau estimate theta_bar_1 (2/(1+alpha))^2."""
    mom = angular_moments(cfg.cross_section())
    tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
    a = cfg.alpha if alpha is None else alpha
    return tc.theta_bar_1 * (2.0 / (1.0 + a)) ** 2


def _map_replicas(worker, count: int, threads: int):
    if threads <= 1:
        return [worker(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(count)))


def ols_line(x: np.ndarray, y: np.ndarray):
    """Least-squares slope and intercept of y against x."""
    coeffs = np.polyfit(x, y, 1)
    return float(coeffs[0]), float(coeffs[1])


def bootstrap_se(curves: np.ndarray, statistic, resamples: int,
                 rng: np.random.Generator) -> float:
    """Std of a statistic of the replica-mean curve under replica resampling.

    Resamples where the statistic is undefined (e.g. an empty fit window)
    are dropped.
    """
    reps = curves.shape[0]
    vals = np.empty(resamples)
    for b in range(resamples):
        pick = rng.integers(0, reps, size=reps)
        vals[b] = statistic(curves[pick].mean(axis=0))
    valid = vals[np.isfinite(vals)]
    if valid.size < 2:
        return float("inf")
    return float(np.std(valid, ddof=1))


def records_table(per_replica_records) -> list:
    """Flatten per-replica record lists into one long trace."""
    return [rec for records_ in per_replica_records for rec in records_]


# ---------------------------------------------------------------------------
# steady-state (plateau) machinery


def _block_se(series: np.ndarray, blocks: int = 6) -> float:
    """Standard error of the mean of a correlated series via block means."""
    series = np.asarray(series, dtype=float)
    blocks = min(blocks, series.size)
    if blocks < 2:
        return float("inf")
    means = np.array([chunk.mean() for chunk in np.array_split(series, blocks)])
    return float(np.std(means, ddof=1)) / math.sqrt(blocks)


@dataclass
class SteadyState:
    theta_inf: float
    theta_se: float
    e_inf: float
    plateau_reached: bool
    plateau_drift: float
    plateau_drift_allowance: float
    hist_masses_w0: np.ndarray      # window-averaged per-bin mass
    hist_masses_w2: np.ndarray      # window-averaged <v>^2-weighted mass
    hist_edges: np.ndarray
    snapshots: int
    theta_trace: np.ndarray         # replica-mean theta over window records
    records: list                   # per-replica record lists (full schedule)
    final_ensembles: list
    stats: dict


def steady_state_run(cfg: ExperimentConfig, alpha: float, seed_offset: int = 0,
                     start_theta: float | None = None,
                     hist_edges: np.ndarray | None = None,
                     l1_reference=None) -> SteadyState:
    """Relax to the rescaled steady state and average over a plateau window.

    Settling and averaging horizons scale with the energy-relaxation time
    1/(rho (1 - alpha)); the window-averaged radial histogram is accumulated
    on fixed edges (equal-probability bins of the limit Maxwellian unless
    given). The plateau criterion compares the replica-mean temperature of
    the last fifth of the window against the previous fifth at 0.5 combined
    standard errors, with a configured relative drift floor.
    """
    cs = cfg.cross_section()
    mom = angular_moments(cs)
    rp = cfg.restitution(alpha)
    pred = predicted_plateau_theta(cfg, alpha)
    theta0 = start_theta
    if theta0 is None:
        theta0 = cfg.initial_theta if cfg.initial_theta > 0 \
            else cfg.start_factor * pred
    relax = 1.0 / max(rp.tau_alpha, 1e-12)
    gap = abs(math.log(max(theta0 / pred, 1e-3)))
    settle = max(cfg.min_settle_time, (cfg.settle_efolds + 0.5 * gap) * relax)
    window = max(cfg.min_window_time, cfg.window_efolds * relax)
    if hist_edges is None:
        tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
        hist_edges = equal_probability_edges(tc.theta_bar_1, cfg.dimension, cfg.bins)
    if l1_reference is None:
        tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
        l1_reference = MaxwellianParams.isotropic(cfg.rho, tc.theta_bar_1,
                                                  cfg.dimension)

    n_window = max(8, int(round(window / cfg.record_spacing)))
    window_times = settle + window * np.arange(1, n_window + 1) / n_window
    schedule = np.concatenate(([settle * 0.5, settle], window_times))

    n = cfg.particle_count
    dcfg = DsmcConfig(particle_count=n, dt=1.0, mode="rescaled",
                      seed=cfg.seed, majorant_refresh_interval=64)

    def worker(rep):
        rng = replica_rng(cfg.seed, seed_offset + rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta0, cfg.dimension), n, rng,
            zero_momentum=True)
        acc = {"w0": np.zeros(hist_edges.size - 1),
               "w2": np.zeros(hist_edges.size - 1), "count": 0}

        def hook(ens, rec):
            if rec.t > settle:
                acc["w0"] += weighted_bin_masses(ens, hist_edges, 0)
                acc["w2"] += weighted_bin_masses(ens, hist_edges, 2)
                acc["count"] += 1

        res = run(e, dcfg, rp, cs, schedule, rng=rng, adaptive_dt=True,
                  pair_samples=cfg.pair_samples, bins=cfg.bins,
                  l1_reference=l1_reference, replica=seed_offset + rep,
                  record_hook=hook)
        return res, acc, e

    results = _map_replicas(worker, cfg.replicas, cfg.threads)

    theta_curves = np.array([[rec.theta for rec in res.records[2:]]
                             for res, _, _ in results])
    theta_trace = theta_curves.mean(axis=0)
    w0 = np.mean([acc["w0"] / acc["count"] for _, acc, _ in results], axis=0)
    w2 = np.mean([acc["w2"] / acc["count"] for _, acc, _ in results], axis=0)

    fifth = max(2, n_window // 5)
    last = theta_curves[:, -fifth:].mean(axis=1)
    prev = theta_curves[:, -2 * fifth:-fifth].mean(axis=1)
    drift = float(abs(last.mean() - prev.mean()))
    if cfg.replicas > 1:
        se = math.hypot(float(np.std(last, ddof=1)) / math.sqrt(cfg.replicas),
                        float(np.std(prev, ddof=1)) / math.sqrt(cfg.replicas))
    else:
        # single replica: records are time-correlated, use block means
        se = math.sqrt(2.0) * _block_se(theta_curves[0, -2 * fifth:])
    allowance = max(0.5 * se, cfg.plateau_drift_floor * pred)

    half = theta_curves[:, n_window // 2:]
    theta_inf = float(half.mean())
    if cfg.replicas > 1:
        theta_se = float(np.std(half.mean(axis=1), ddof=1)) / math.sqrt(cfg.replicas)
    else:
        theta_se = _block_se(half[0])

    agg = {"steps": sum(res.stats["steps"] for res, _, _ in results),
           "collisions": sum(res.stats["collisions"] for res, _, _ in results),
           "majorant_violations": sum(res.stats["majorant_violations"]
                                      for res, _, _ in results),
           "settle_time": settle, "window_time": window}
    return SteadyState(
        theta_inf=theta_inf, theta_se=theta_se,
        e_inf=cfg.rho * cfg.dimension * theta_inf,
        plateau_reached=drift <= allowance, plateau_drift=drift,
        plateau_drift_allowance=allowance,
        hist_masses_w0=w0, hist_masses_w2=w2, hist_edges=hist_edges,
        snapshots=sum(acc["count"] for _, acc, _ in results),
        theta_trace=theta_trace,
        records=[res.records for res, _, _ in results],
        final_ensembles=[e for _, _, e in results], stats=agg)


def histogram_noise_floor(cfg: ExperimentConfig, theta: float,
                          edges: np.ndarray, snapshots: int,
                          weight_power: int = 2, seed_offset: int = 9000,
                          controls: int = 3, max_measured: int = 160) -> float:
    """Estimator floor: the averaging pipeline fed by the reference itself.

    Draws independent ensembles from M_{rho,0,theta}, averages their weighted
    bin masses, and measures the distance to the exact reference masses. For
    large snapshot counts the floor is measured at max_measured snapshots and
    scaled by the 1/sqrt(snapshots) law.
    """
    ref = maxwellian_bin_masses(cfg.rho, theta, cfg.dimension, edges, weight_power)
    measured = min(max(snapshots, 1), max_measured)
    dists = []
    for c in range(controls):
        rng = replica_rng(cfg.seed, seed_offset + c)
        acc = np.zeros(edges.size - 1)
        for _ in range(measured):
            e = sample_maxwellian(
                MaxwellianParams.isotropic(cfg.rho, theta, cfg.dimension),
                cfg.particle_count, rng)
            acc += weighted_bin_masses(e, edges, weight_power)
        dists.append(l1_histogram_distance(acc / measured, ref))
    return float(np.mean(dists)) * math.sqrt(measured / max(snapshots, 1))


def _subtract_floor(distance: float, floor: float) -> float:
    return math.sqrt(max(distance * distance - floor * floor, 0.0))


# ---------------------------------------------------------------------------
# the studies


def haff_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Free cooling: fit theta(t) = A / (1 + tau t)^p over the decay window.

    The decay exponent targets 2 and the prefactor A is cross-validated
    against the rescaled-mode plateau temperature mapped through the
    self-similar change of variables (theta(t) = theta_inf / (1 + tau t)^2).
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    target = {
        "claim": "free-cooling temperature decays as theta ~ A (1 + tau t)^-2 "
                 "with A the rescaled steady-state temperature",
        "exponent": 2.0, "exponent_tol": 0.1, "prefactor_ratio_tol": 0.10,
    }
    if cfg.alpha >= 1.0 or cfg.alpha < 0.8:
        return ExperimentReport(
            name="haff", config=snapshot, fitted={}, target=target,
            passed=False, status="inconclusive", wall_clock=time.time() - t0,
            replicas=0,
            details={"reason": "no decay window: alpha must lie in [0.8, 1)"})

    cs = cfg.cross_section()
    rp = cfg.restitution()
    tau = rp.tau_alpha
    theta0 = cfg.initial_theta if cfg.initial_theta > 0 \
        else predicted_plateau_theta(cfg)
    schedule = np.geomspace(0.05 / tau, 1.1 * cfg.haff_window_hi / tau,
                            cfg.haff_records)
    dcfg = DsmcConfig(particle_count=cfg.particle_count, dt=1.0,
                      mode="original", seed=cfg.seed)

    def worker(rep):
        rng = replica_rng(cfg.seed, rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta0, cfg.dimension),
            cfg.particle_count, rng, zero_momentum=True)
        return run(e, dcfg, rp, cs, schedule, rng=rng, adaptive_dt=True,
                   pair_samples=cfg.pair_samples, bins=cfg.bins, replica=rep)

    results = _map_replicas(worker, cfg.replicas, cfg.threads)
    curves = np.array([[rec.theta for rec in res.records] for res in results])

    in_window = (schedule * tau >= cfg.haff_window_lo) \
        & (schedule * tau <= cfg.haff_window_hi)
    x = np.log1p(tau * schedule[in_window])

    def fit(mean_curve):
        slope, intercept = ols_line(x, np.log(mean_curve[in_window]))
        return -slope, math.exp(intercept)

    p_hat, a_hat = fit(curves.mean(axis=0))
    rng_boot = replica_rng(cfg.seed, 77_000)
    p_se = bootstrap_se(curves, lambda c: fit(c)[0], cfg.bootstrap_resamples,
                        rng_boot)
    a_se = bootstrap_se(curves, lambda c: fit(c)[1], cfg.bootstrap_resamples,
                        rng_boot)

    # rescaled-mode companion for the prefactor cross-check
    companion = replace(cfg, particle_count=min(cfg.particle_count, 20_000),
                        replicas=2, initial_theta=0.0)
    steady = steady_state_run(companion, cfg.alpha, seed_offset=500)
    ratio = a_hat / steady.theta_inf

    exponent_ok = abs(p_hat - 2.0) <= target["exponent_tol"]
    prefactor_ok = abs(ratio - 1.0) <= target["prefactor_ratio_tol"]
    passed = exponent_ok and prefactor_ok
    return ExperimentReport(
        name="haff", config=snapshot,
        fitted={"exponent": p_hat, "exponent_se": p_se,
                "prefactor": a_hat, "prefactor_se": a_se,
                "plateau_theta": steady.theta_inf,
                "prefactor_over_plateau": ratio},
        target=target, passed=passed,
        status="pass" if passed else "fail",
        wall_clock=time.time() - t0, replicas=cfg.replicas,
        details={"initial_theta": theta0, "tau_alpha": tau,
                 "exponent_ok": exponent_ok, "prefactor_ok": prefactor_ok,
                 "companion_plateau_reached": steady.plateau_reached},
        artifacts={"traces": records_table([r.records for r in results]),
                   "companion_traces": records_table(steady.records)})


def profile_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Rescaled-mode plateau: temperature and profile vs the limit Maxwellian.

    Measures theta_inf / theta_bar_1 and the weighted L1 distance of the
    window-averaged steady profile to M_{rho,0,theta_bar_1} (noise floor
    subtracted). If the plateau instead matches the 9/4-rescaled temperature
    constant, that is reported explicitly instead of failing silently.
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    mom = angular_moments(cfg.cross_section())
    tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
    target = {
        "claim": "the rescaled steady state approaches the Maxwellian with the "
                 "quasi-elastic temperature as alpha -> 1",
        "theta_bar_1": tc.theta_bar_1, "theta_ratio_tol": 0.05,
    }
    steady = steady_state_run(cfg, cfg.alpha)
    ratio = steady.theta_inf / tc.theta_bar_1

    ref_w2 = maxwellian_bin_masses(cfg.rho, tc.theta_bar_1, cfg.dimension,
                                   steady.hist_edges, 2)
    ref_w0 = maxwellian_bin_masses(cfg.rho, tc.theta_bar_1, cfg.dimension,
                                   steady.hist_edges, 0)
    dist = l1_histogram_distance(steady.hist_masses_w2, ref_w2)
    per_replica_snaps = max(1, steady.snapshots // cfg.replicas)
    floor = histogram_noise_floor(cfg, tc.theta_bar_1, steady.hist_edges,
                                  per_replica_snaps) / math.sqrt(cfg.replicas)
    matched_w2 = maxwellian_bin_masses(cfg.rho, steady.theta_inf, cfg.dimension,
                                       steady.hist_edges, 2)
    dist_matched = l1_histogram_distance(steady.hist_masses_w2, matched_w2)

    # the internally inconsistent alternative 3-D constant differs by 9/4
    alt_theta = 2.25 * tc.theta_bar_1
    theta_ok = abs(ratio - 1.0) <= target["theta_ratio_tol"]
    matches_alternative = abs(steady.theta_inf / alt_theta - 1.0) \
        <= target["theta_ratio_tol"]
    passed = theta_ok and steady.plateau_reached
    status = "pass" if passed else ("inconclusive" if not steady.plateau_reached
                                    else "fail")
    details = {
        "plateau_reached": steady.plateau_reached,
        "plateau_drift": steady.plateau_drift,
        "plateau_drift_allowance": steady.plateau_drift_allowance,
        "snapshots": steady.snapshots,
        "l1w2_noise_floor": floor,
        "l1w2_to_matched_maxwellian": dist_matched,
        "matches_alternative_constant": matches_alternative,
        "alternative_theta": alt_theta,
    }
    if not theta_ok and matches_alternative:
        details["adjudication"] = (
            "plateau temperature matches the 9/4-rescaled alternative constant "
            "rather than the normative quasi-elastic temperature")
    hist_rows = [(steady.hist_edges[i], steady.hist_edges[i + 1],
                  steady.hist_masses_w0[i], ref_w0[i])
                 for i in range(steady.hist_masses_w0.size)]
    return ExperimentReport(
        name="profile", config=snapshot,
        fitted={"theta_inf": steady.theta_inf, "theta_inf_se": steady.theta_se,
                "theta_ratio": ratio,
                "l1w2_to_limit_maxwellian": dist,
                "l1w2_floor_subtracted": _subtract_floor(dist, floor)},
        target=target, passed=passed, status=status,
        wall_clock=time.time() - t0, replicas=cfg.replicas, details=details,
        artifacts={"traces": records_table(steady.records),
                   "histogram": hist_rows, "steady": steady})


def eigenvalue_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Energy-relaxation rate: log-linear fit of E(t) - E_inf near the plateau.

    Initializes at eigen_start_factor times the plateau temperature and fits
    the replica-mean residual over the window where it lies between the
    configured fractions of its initial value; the target rate is
    -rho (1 - alpha).
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    rp = cfg.restitution()
    target = {
        "claim": "near the steady state the energy relaxes at rate "
                 "-rho (1 - alpha) to first order",
        "rate": -rp.rho * (1.0 - cfg.alpha), "rate_rel_tol": 0.2,
    }
    # plateau energy from a dedicated prior steady run at larger n
    pre = replace(cfg, particle_count=max(cfg.particle_count, 20_000),
                  replicas=2, initial_theta=0.0)
    steady = steady_state_run(pre, cfg.alpha, seed_offset=300)
    e_inf = steady.e_inf

    theta_start = cfg.eigen_start_factor * steady.theta_inf
    relax = 1.0 / max(rp.tau_alpha, 1e-12)
    horizon = 2.2 * relax
    schedule = np.linspace(horizon / cfg.eigen_records, horizon,
                           cfg.eigen_records)
    cs = cfg.cross_section()
    dcfg = DsmcConfig(particle_count=cfg.particle_count, dt=1.0,
                      mode="rescaled", seed=cfg.seed)

    def worker(rep):
        rng = replica_rng(cfg.seed, 1000 + rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta_start, cfg.dimension),
            cfg.particle_count, rng, zero_momentum=True)
        return run(e, dcfg, rp, cs, schedule, rng=rng, adaptive_dt=True,
                   pair_samples=256, bins=cfg.bins, replica=rep)

    results = _map_replicas(worker, cfg.replicas, cfg.threads)
    curves = np.array([[rec.energy for rec in res.records] for res in results])
    mean_curve = curves.mean(axis=0)
    resid0 = (cfg.eigen_start_factor - 1.0) * e_inf

    def fit_rate(curve):
        resid = curve - e_inf
        mask = (resid <= cfg.eigen_window_hi * resid0) \
            & (resid >= cfg.eigen_window_lo * resid0)
        if int(np.sum(mask)) < 4:
            return math.nan
        slope, _ = ols_line(schedule[mask], np.log(resid[mask]))
        return slope

    artifacts = {"traces": records_table([r.records for r in results]),
                 "energy_curves": curves, "schedule": schedule, "e_inf": e_inf}
    mu_hat = fit_rate(mean_curve)
    if math.isnan(mu_hat):
        return ExperimentReport(
            name="eigenvalue", config=snapshot, fitted={}, target=target,
            passed=False, status="inconclusive",
            wall_clock=time.time() - t0, replicas=cfg.replicas,
            details={"reason": "residual left the fit window too quickly; "
                               "increase replicas or records"},
            artifacts=artifacts)
    rng_boot = replica_rng(cfg.seed, 78_000)
    mu_se = bootstrap_se(curves, fit_rate, cfg.bootstrap_resamples, rng_boot)

    ratio = mu_hat / target["rate"]
    passed = abs(ratio - 1.0) <= target["rate_rel_tol"]
    return ExperimentReport(
        name="eigenvalue", config=snapshot,
        fitted={"rate": mu_hat, "rate_se": mu_se, "rate_over_target": ratio,
                "plateau_theta": steady.theta_inf, "e_inf": e_inf},
        target=target, passed=passed, status="pass" if passed else "fail",
        wall_clock=time.time() - t0, replicas=cfg.replicas,
        details={"theta_start": theta_start,
                 "plateau_reached": steady.plateau_reached},
        artifacts=artifacts)


def elastic_limit_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    """Steady-profile distance to the limit Maxwellian along an alpha sweep.

    d(alpha) = weighted L1 distance of the window-averaged steady profile to
    M_{rho,0,theta_bar_1}, noise-floor subtracted; the sweep must be strictly
    decreasing toward alpha = 1 with fitted exponent s > 0.2 in (1 - alpha).
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    mom = angular_moments(cfg.cross_section())
    tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
    target = {
        "claim": "the steady profile approaches the limit Maxwellian as "
                 "alpha -> 1 with a positive algebraic rate in (1 - alpha)",
        "exponent_min": 0.2,
    }
    edges = equal_probability_edges(tc.theta_bar_1, cfg.dimension, cfg.bins)
    ref_w2 = maxwellian_bin_masses(cfg.rho, tc.theta_bar_1, cfg.dimension,
                                   edges, 2)

    rows = []
    traces = []
    truncated = False
    for idx, alpha in enumerate(cfg.sweep_alphas):
        steady = steady_state_run(cfg, alpha, seed_offset=2000 + 100 * idx,
                                  hist_edges=edges)
        dist = l1_histogram_distance(steady.hist_masses_w2, ref_w2)
        per_replica_snaps = max(1, steady.snapshots // cfg.replicas)
        floor = histogram_noise_floor(
            cfg, tc.theta_bar_1, edges, per_replica_snaps,
            seed_offset=9100 + 100 * idx) / math.sqrt(cfg.replicas)
        corrected = _subtract_floor(dist, floor)
        if dist <= 2.0 * floor:
            truncated = True
        rows.append({"alpha": alpha, "distance": dist, "floor": floor,
                     "corrected": corrected, "theta_inf": steady.theta_inf,
                     "plateau_reached": steady.plateau_reached})
        traces.extend(records_table(steady.records))

    usable = [r for r in rows if r["corrected"] > 0]
    decreasing = all(a["corrected"] > b["corrected"]
                     for a, b in zip(rows, rows[1:]))
    if len(usable) >= 2:
        x = np.log([1.0 - r["alpha"] for r in usable])
        y = np.log([r["corrected"] for r in usable])
        s_hat, _ = ols_line(x, y)
    else:
        s_hat = math.nan
    passed = decreasing and (not math.isnan(s_hat)) \
        and s_hat > target["exponent_min"]
    status = "pass" if passed else ("inconclusive" if truncated else "fail")
    return ExperimentReport(
        name="sweep", config=snapshot,
        fitted={"exponent": s_hat,
                **{f"distance_alpha_{r['alpha']}": r["distance"] for r in rows},
                **{f"corrected_alpha_{r['alpha']}": r["corrected"]
                   for r in rows}},
        target=target, passed=passed, status=status,
        wall_clock=time.time() - t0, replicas=cfg.replicas,
        details={"strictly_decreasing": decreasing,
                 "noise_truncated": truncated,
                 **{f"floor_alpha_{r['alpha']}": r["floor"] for r in rows}},
        artifacts={"rows": rows, "traces": traces})


def lyapunov_monitor(cfg: ExperimentConfig) -> ExperimentReport:
    """Monotonicity monitor for H1(g) = H(g|M[g]) + (E - E_inf)^2.

    Tracks the replica-median H1 along the relaxation from a hot Maxwellian
    start; after a transient of two mean free times, the fraction of record
    intervals with an increase beyond the estimator noise must stay at or
    below the configured budget. E_inf is the measured tail plateau energy,
    the stand-in for the (non-explicit) steady-profile energy.
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    rp = cfg.restitution()
    target = {
        "claim": "H(g|M[g]) + (E - E_inf)^2 decreases along the rescaled flow "
                 "beyond an initial transient",
        "increase_budget": cfg.lyap_increase_budget,
    }
    pred = predicted_plateau_theta(cfg)
    theta_start = cfg.initial_theta if cfg.initial_theta > 0 \
        else cfg.lyap_start_factor * pred
    relax = 1.0 / max(rp.tau_alpha, 1e-12)
    horizon = (2.0 + math.log(max(theta_start / pred, 2.0))) * relax
    records = 60
    schedule = np.linspace(horizon / records, horizon, records)
    cs = cfg.cross_section()
    mom = angular_moments(cs)
    dcfg = DsmcConfig(particle_count=cfg.particle_count, dt=1.0,
                      mode="rescaled", seed=cfg.seed)

    def worker(rep):
        rng = replica_rng(cfg.seed, 3000 + rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta_start, cfg.dimension),
            cfg.particle_count, rng, zero_momentum=True)
        return run(e, dcfg, rp, cs, schedule, rng=rng, adaptive_dt=True,
                   pair_samples=256, bins=cfg.bins, replica=rep)

    results = _map_replicas(worker, cfg.replicas, cfg.threads)
    energies = np.array([[rec.energy for rec in res.records] for res in results])
    entropies = np.array([[rec.rel_entropy for rec in res.records]
                          for res in results])
    tail = max(4, records // 10)
    e_inf = float(energies[:, -tail:].mean())
    h1 = entropies + (energies - e_inf) ** 2
    median = np.median(h1, axis=0)

    # transient: two mean free times at the plateau collision rate
    rate = rp.rho * mom.b0 * 4.0 * math.sqrt(pred / math.pi)
    transient = 2.0 / rate
    monitored = schedule >= transient
    diffs = np.diff(median[monitored])
    late = diffs[-max(6, diffs.size // 5):]
    noise = float(np.std(late, ddof=1)) if late.size > 2 else 0.0
    threshold = cfg.lyap_noise_sigmas * noise
    increases = int(np.sum(diffs > threshold))
    fraction = increases / max(diffs.size, 1)

    passed = fraction <= cfg.lyap_increase_budget
    return ExperimentReport(
        name="lyapunov", config=snapshot,
        fitted={"increase_fraction": fraction, "e_inf": e_inf,
                "noise_threshold": threshold},
        target=target, passed=passed, status="pass" if passed else "fail",
        wall_clock=time.time() - t0, replicas=cfg.replicas,
        details={"theta_start": theta_start, "transient_time": transient,
                 "monitored_intervals": int(diffs.size)},
        artifacts={"traces": records_table([r.records for r in results]),
                   "schedule": schedule, "median_h1": median, "h1": h1})


def energy_ode_check(cfg: ExperimentConfig) -> ExperimentReport:
    """Closure of the energy equation against the Gaussian dissipation oracle.

    Compares finite differences of the replica-mean energy with
    -(1 - alpha^2) D_E(M[g_t]) + 2 rho (1 - alpha) E over the approach to the
    plateau, where D_E of the matched Maxwellian comes from the closed-form
    pair moment. Deviations are relative to the predicted derivative.
    """
    t0 = time.time()
    snapshot = _config_snapshot(cfg)
    rp = cfg.restitution()
    mom = angular_moments(cfg.cross_section())
    tc = quasi_elastic_temperature(mom, cfg.dimension, cfg.rho)
    target = {
        "claim": "dE/dt closes against the matched-Maxwellian dissipation "
                 "oracle in the near-elastic regime",
        "max_rel_deviation": cfg.ode_tolerance,
    }
    theta_start = cfg.initial_theta if cfg.initial_theta > 0 \
        else 2.0 * tc.theta_bar_1
    relax = 1.0 / max(rp.tau_alpha, 1e-12)
    horizon = 1.6 * relax
    schedule = np.linspace(horizon / cfg.ode_records, horizon, cfg.ode_records)
    cs = cfg.cross_section()
    dcfg = DsmcConfig(particle_count=cfg.particle_count, dt=1.0,
                      mode="rescaled", seed=cfg.seed)

    def worker(rep):
        rng = replica_rng(cfg.seed, 4000 + rep)
        e = sample_maxwellian(
            MaxwellianParams.isotropic(cfg.rho, theta_start, cfg.dimension),
            cfg.particle_count, rng, zero_momentum=True)
        return run(e, dcfg, rp, cs, schedule, rng=rng, adaptive_dt=True,
                   pair_samples=256, bins=cfg.bins, replica=rep)

    results = _map_replicas(worker, cfg.replicas, cfg.threads)
    curves = np.array([[rec.energy for rec in res.records] for res in results])
    mean_e = curves.mean(axis=0)

    dt_grid = schedule[1] - schedule[0]
    deriv = (mean_e[2:] - mean_e[:-2]) / (2.0 * dt_grid)
    mid_e = mean_e[1:-1]
    theta_mid = mid_e / (cfg.rho * cfg.dimension)
    pred = np.array([
        -(1.0 - rp.alpha ** 2) * mom.b1 * pair_moment_u3(
            MaxwellianParams.isotropic(cfg.rho, th, cfg.dimension),
            quadrature=False)
        + 2.0 * rp.tau_alpha * e for th, e in zip(theta_mid, mid_e)])

    e_bar = tc.E_bar_1
    gap0 = abs(mean_e[0] - e_bar)
    approach = np.abs(mid_e - e_bar) > 0.25 * gap0
    artifacts = {"traces": records_table([r.records for r in results]),
                 "schedule": schedule, "mean_energy": mean_e,
                 "deriv": deriv, "pred": pred}
    if int(np.sum(approach)) < 4:
        return ExperimentReport(
            name="energy-ode", config=snapshot, fitted={}, target=target,
            passed=False, status="inconclusive",
            wall_clock=time.time() - t0, replicas=cfg.replicas,
            details={"reason": "approach window too short"},
            artifacts=artifacts)
    rel_dev = np.abs(deriv[approach] - pred[approach]) / np.abs(pred[approach])
    max_dev = float(np.max(rel_dev))

    # sign check: above the limit energy the gas cools, below it heats
    signs_ok = bool(np.all(np.sign(deriv[approach])
                           == -np.sign(mid_e[approach] - e_bar)))
    passed = max_dev <= cfg.ode_tolerance and signs_ok
    return ExperimentReport(
        name="energy-ode", config=snapshot,
        fitted={"max_rel_deviation": max_dev,
                "mean_rel_deviation": float(np.mean(rel_dev))},
        target=target, passed=passed, status="pass" if passed else "fail",
        wall_clock=time.time() - t0, replicas=cfg.replicas,
        details={"sign_check_ok": signs_ok, "theta_start": theta_start,
                 "approach_points": int(np.sum(approach))},
        artifacts=artifacts)


EXPERIMENTS = {
    "haff": haff_experiment,
    "profile": profile_experiment,
    "eigen": eigenvalue_experiment,
    "sweep": elastic_limit_sweep,
    "lyapunov": lyapunov_monitor,
    "energy-ode": energy_ode_check,
}
