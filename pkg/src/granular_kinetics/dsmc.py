"""Stochastic particle solver for the freely cooling granular gas.

Nanbu-Babovsky style DSMC with a global relative-velocity majorant: each step
pairs up a uniform sample of distinct particles as collision candidates,
accepts pair (i, j) with probability |v_i - v_j| / u_max, samples the
scattering direction from the angular cross-section, and applies the
inelastic collision rule exactly.

Two modes:
  * original: the cooling equation, collisions only;
  * rescaled: the self-similar equation, collisions followed by the exact
    characteristic flow of the anti-drift term, i.e. multiplying every
    velocity by exp(tau dt) with tau = rho (1 - alpha).

Energy bookkeeping is exact per collision (each accepted pair's energy change
is accumulated and must reproduce the measured energy difference).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .ensemble import ParticleEnsemble, build_record
from .errors import ConfigError, ContractViolationError, CorruptedStateError
from .kernel import (AngularMoments, CrossSection, RestitutionParams,
                     angular_moments, post_collision_pairs, sample_sigma_batch)

MAX_COLLISION_PROB = 0.2      # per-particle collision probability cap per step
MAX_CANDIDATE_FRACTION = 0.95  # disjoint pairing needs 2 N_cand <= n
MAX_TAU_DT = 1e-3             # splitting-error cap on the anti-drift substep
MAJORANT_SAFETY = 1.5
MAJORANT_SAMPLE_PAIRS = 4096


@dataclass(frozen=True)
class DsmcConfig:
    """Solver configuration; dt constraints are checked against the ensemble."""

    particle_count: int
    dt: float
    majorant_relvel: float | None = None   # u_max; None = estimate from ensemble
    majorant_refresh_interval: int = 64
    seed: int = 1
    mode: str = "rescaled"
    recenter_momentum: bool | None = None  # None = on in rescaled mode

    def __post_init__(self):
        if self.mode not in ("original", "rescaled"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.particle_count < 2:
            raise ConfigError("particle_count must be >= 2")
        if self.majorant_refresh_interval < 1:
            raise ConfigError("majorant_refresh_interval must be >= 1")
        if self.recenter_momentum is None:
            object.__setattr__(self, "recenter_momentum", self.mode == "rescaled")


@dataclass(frozen=True)
class StepStats:
    """Per-step bookkeeping of the collision and stretch substeps."""

    candidates: int
    accepted: int
    energy_before: float
    energy_after: float
    sum_of_deltas: float
    majorant_violations: int
    stretch_factor: float = 1.0
    candidate_capped: bool = False


def estimate_majorant(e: ParticleEnsemble, rng: np.random.Generator,
                      safety: float = MAJORANT_SAFETY) -> float:
    """u_max = safety * max |v_i - v_j| over a random pair subsample."""
    n = e.count
    pairs = min(n // 2, MAJORANT_SAMPLE_PAIRS)
    idx = rng.choice(n, size=2 * pairs, replace=False)
    rel = e.velocities[idx[:pairs]] - e.velocities[idx[pairs:]]
    u_max = safety * float(np.max(np.linalg.norm(rel, axis=1)))
    if not u_max > 0:
        # fully degenerate ensemble; any positive majorant gives zero accepts
        u_max = 1.0
    return u_max


def collision_rate_estimate(e: ParticleEnsemble, rp: RestitutionParams,
                            mom: AngularMoments, rng: np.random.Generator) -> float:
    """Per-particle collision rate rho b0 E|u| from a pair subsample."""
    n = e.count
    pairs = min(n // 2, MAJORANT_SAMPLE_PAIRS)
    idx = rng.choice(n, size=2 * pairs, replace=False)
    rel = e.velocities[idx[:pairs]] - e.velocities[idx[pairs:]]
    return rp.rho * mom.b0 * float(np.mean(np.linalg.norm(rel, axis=1)))


def max_stable_dt(e: ParticleEnsemble, rp: RestitutionParams, mom: AngularMoments,
                  rng: np.random.Generator, u_max: float | None = None,
                  mode: str = "rescaled") -> float:
    """Largest dt honoring the collision-probability, candidate and drift caps.

    The anti-drift splitting cap tau dt <= MAX_TAU_DT only applies in
    rescaled mode (the original equation has no drift substep).
    """
    if u_max is None:
        u_max = estimate_majorant(e, rng)
    rate = collision_rate_estimate(e, rp, mom, rng)
    dt = MAX_COLLISION_PROB / max(rate, 1e-300)
    dt = min(dt, MAX_CANDIDATE_FRACTION / max(rp.rho * mom.b0 * u_max, 1e-300))
    if mode == "rescaled" and rp.tau_alpha > 0:
        dt = min(dt, MAX_TAU_DT / rp.tau_alpha)
    return dt


def _validate_dt(e: ParticleEnsemble, cfg: DsmcConfig, rp: RestitutionParams,
                 mom: AngularMoments, u_max: float, rng: np.random.Generator):
    rate = collision_rate_estimate(e, rp, mom, rng)
    if cfg.dt * rate > MAX_COLLISION_PROB * 1.05:
        raise ConfigError(
            f"dt * collision rate = {cfg.dt * rate:.3g} exceeds {MAX_COLLISION_PROB}")
    if rp.rho * mom.b0 * u_max * cfg.dt > 1.0:
        raise ConfigError("dt too large for disjoint candidate pairing "
                          "(rho b0 u_max dt > 1)")
    if cfg.mode == "rescaled" and rp.tau_alpha * cfg.dt > MAX_TAU_DT * 1.05:
        raise ConfigError(f"tau_alpha * dt = {rp.tau_alpha * cfg.dt:.3g} exceeds {MAX_TAU_DT}")


def _weighted_energy(e: ParticleEnsemble) -> float:
    return e.weight * float(np.einsum("ij,ij->", e.velocities, e.velocities))


def step(e: ParticleEnsemble, cfg: DsmcConfig, rp: RestitutionParams,
         cs: CrossSection, rng: np.random.Generator,
         u_max: float | None = None, mom: AngularMoments | None = None,
         dt: float | None = None) -> StepStats:
    """Advance the ensemble by one time step of length dt (default cfg.dt).

    Mutates e.velocities in place and draws from rng; everything else is
    pure. Candidate pairs are disjoint within the step (each particle
    collides at most once per step), which keeps the vectorized update exact;
    the marginal collision probability of any unordered pair is unchanged.
    Majorant violations (|u| > u_max) are accepted with probability one and
    counted.
    """
    if mom is None:
        mom = angular_moments(cs)
    if u_max is None:
        u_max = cfg.majorant_relvel
        if u_max is None:
            u_max = estimate_majorant(e, rng)
    if dt is None:
        dt = cfg.dt
    n = e.count
    v = e.velocities
    w = e.weight

    energy_before = _weighted_energy(e)
    if not math.isfinite(energy_before):
        raise CorruptedStateError("non-finite velocities entering step")

    # candidate count n rho b0 u_max dt / 2 with stochastic rounding
    n_mean = 0.5 * n * rp.rho * mom.b0 * u_max * dt
    if not math.isfinite(n_mean) or n_mean > 2 ** 52:
        raise ConfigError(f"candidate count overflow (N_cand = {n_mean:.3g})")
    n_cand = int(math.floor(n_mean))
    if rng.random() < n_mean - n_cand:
        n_cand += 1
    capped = n_cand > n // 2
    if capped:
        n_cand = n // 2

    accepted = 0
    violations = 0
    sum_deltas = 0.0
    if n_cand > 0:
        # disjoint candidate pairs: a uniform sample of 2 N_cand distinct
        # particles, equivalent in law to the head of a random permutation
        idx = rng.choice(n, size=2 * n_cand, replace=False)
        ii = idx[:n_cand]
        jj = idx[n_cand:]
        rel = v[ii] - v[jj]
        speed = np.linalg.norm(rel, axis=1)
        violations = int(np.sum(speed > u_max))
        accept = rng.random(n_cand) * u_max < speed
        if np.any(accept):
            ai = ii[accept]
            aj = jj[accept]
            accepted = ai.size
            u_hat = rel[accept] / speed[accept][:, None]
            sigma = sample_sigma_batch(u_hat, cs, rng)
            vi_p, vj_p, deltas = post_collision_pairs(v[ai], v[aj], sigma, rp.alpha)
            # per-collision exactness: energy change must match the closed form
            actual = (np.einsum("ij,ij->i", vi_p, vi_p)
                      + np.einsum("ij,ij->i", vj_p, vj_p)
                      - np.einsum("ij,ij->i", v[ai], v[ai])
                      - np.einsum("ij,ij->i", v[aj], v[aj]))
            scale = np.einsum("ij,ij->i", v[ai], v[ai]) + np.einsum("ij,ij->i", v[aj], v[aj])
            assert np.all(np.abs(actual - deltas) <= 1e-12 * np.maximum(scale, np.abs(deltas)) + 1e-300), \
                "per-collision energy identity violated"
            v[ai] = vi_p
            v[aj] = vj_p
            sum_deltas = w * float(np.sum(deltas))

    stretch = 1.0
    if cfg.mode == "rescaled" and rp.tau_alpha > 0.0:
        stretch = math.exp(rp.tau_alpha * dt)
        v *= stretch

    energy_after = _weighted_energy(e)
    if not math.isfinite(energy_after):
        raise CorruptedStateError("non-finite velocities after collision substep")

    if cfg.recenter_momentum:
        v -= v.mean(axis=0)

    return StepStats(candidates=n_cand, accepted=accepted,
                     energy_before=energy_before, energy_after=energy_after,
                     sum_of_deltas=sum_deltas, majorant_violations=violations,
                     stretch_factor=stretch, candidate_capped=capped)


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Counter-based Philox stream for (seed, replica); documented RNG contract."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, replica))))


@dataclass
class RunResult:
    records: list
    stats: dict


def run(e: ParticleEnsemble, cfg: DsmcConfig, rp: RestitutionParams,
        cs: CrossSection, schedule, rng: np.random.Generator | None = None,
        pair_samples: int = 2048, bins: int = 64, l1_reference=None,
        replica: int = 0, adaptive_dt: bool = False,
        record_hook=None) -> RunResult:
    """Advance e through the output schedule, emitting one record per time.

    schedule is an increasing list of output times (t = 0 records the initial
    state if present). The relative-velocity majorant is refreshed every
    cfg.majorant_refresh_interval steps from a pair subsample and tracked
    through the rescaled-mode stretch. With adaptive_dt the step length is
    re-derived from the current collision rate at every refresh (still fully
    deterministic for a fixed seed); otherwise cfg.dt is used throughout.

    Bit-reproducible for fixed (seed, config, initial ensemble) in
    single-threaded use: all randomness flows from the single rng stream.
    """
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ContractViolationError("schedule must be strictly increasing")
    if rng is None:
        rng = replica_rng(cfg.seed, replica)
    mom = angular_moments(cs)

    u_max = cfg.majorant_relvel
    if u_max is None:
        u_max = estimate_majorant(e, rng)
    dt_nominal = cfg.dt
    if adaptive_dt:
        dt_nominal = max_stable_dt(e, rp, mom, rng, u_max=u_max, mode=cfg.mode)
    else:
        _validate_dt(e, cfg, rp, mom, u_max, rng)

    t = 0.0
    steps = 0
    collisions = 0
    violations = 0
    cap_hits = 0
    records = []

    def emit(time_now):
        rec = build_record(e, time_now, mom, rng, pair_samples=pair_samples,
                           bins=bins, l1_reference=l1_reference,
                           collisions=collisions, replica=replica)
        records.append(rec)
        if record_hook is not None:
            record_hook(e, rec)

    for t_out in schedule:
        if t_out <= t + 1e-15 * max(t, 1.0):
            emit(t)
            continue
        while t < t_out - 1e-12 * max(t_out, 1.0):
            if steps % cfg.majorant_refresh_interval == 0 and steps > 0:
                u_max = estimate_majorant(e, rng)
                if adaptive_dt:
                    dt_nominal = max_stable_dt(e, rp, mom, rng, u_max=u_max,
                                               mode=cfg.mode)
            dt = min(dt_nominal, t_out - t)
            stats = step(e, cfg, rp, cs, rng, u_max=u_max, mom=mom, dt=dt)
            collisions += stats.accepted
            violations += stats.majorant_violations
            cap_hits += int(stats.candidate_capped)
            u_max *= stats.stretch_factor
            t += dt
            steps += 1
        t = t_out
        emit(t)

    return RunResult(records=records, stats={
        "steps": steps, "collisions": collisions,
        "majorant_violations": violations, "candidate_cap_hits": cap_hits,
        "final_u_max": u_max, "final_dt": dt_nominal,
    })


def transform_rescaled_to_original(records, rp: RestitutionParams,
                                   v0: float = 1.0):
    """Map a rescaled-mode record stream onto original (cooling) variables.

    The self-similar change of variables sends rescaled time t to
    t_orig = (exp(tau t) - V0)/tau and scales velocities by
    s = V0 + tau t_orig = exp(tau t): temperature and energy pick up s^-2,
    the homogeneous moment of order 2k picks up s^-2k, momentum s^-1, the
    dissipation estimate s^-3. tau = 0 (elastic) is the identity.
    """
    if not v0 > 0:
        raise ContractViolationError("V0 must be positive")
    tau = rp.tau_alpha
    if tau == 0.0:
        return [replace(r) for r in records]
    out = []
    for r in records:
        s = math.exp(tau * r.t)
        t_orig = (s - v0) / tau
        out.append(replace(
            r, t=t_orig, momentum=r.momentum / s, energy=r.energy / s ** 2,
            theta=r.theta / s ** 2, m_half=r.m_half / s, m_32=r.m_32 / s ** 3,
            m_2=r.m_2 / s ** 4, m_3=r.m_3 / s ** 6,
            de_est=r.de_est / s ** 3, de_se=r.de_se / s ** 3,
        ))
    return out
