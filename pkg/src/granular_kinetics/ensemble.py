"""Particle-ensemble state and scalar diagnostics.

A ParticleEnsemble is a set of equal-weight velocity samples representing a
distribution of physical mass rho. Diagnostics are read-only: empirical
moments, a Monte Carlo estimator of the energy-dissipation functional
D_E = b1 int int f f* |u|^3, radial-histogram densities, a plug-in relative
entropy against the matched Maxwellian, weighted L1 distances, and the
steady-state energy bounds.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, gammainc, gammaincinv

from .errors import ContractViolationError
from .kernel import AngularMoments, sphere_area

MOMENT_ORDERS = (0.5, 1.5, 2.0, 3.0)


@dataclass
class ParticleEnsemble:
    """Equal-weight empirical velocity distribution of total mass rho."""

    velocities: np.ndarray
    rho: float
    zero_momentum: bool = False

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.velocities, dtype=float))
        if v.ndim != 2 or v.shape[0] < 2:
            raise ContractViolationError("need a (count, N) array with count >= 2")
        if not np.all(np.isfinite(v)):
            raise ContractViolationError("velocities must be finite")
        if not self.rho > 0:
            raise ContractViolationError("rho must be positive")
        if self.zero_momentum:
            v = v - v.mean(axis=0)
        self.velocities = v

    @property
    def count(self) -> int:
        return self.velocities.shape[0]

    @property
    def dimension(self) -> int:
        return self.velocities.shape[1]

    @property
    def weight(self) -> float:
        """Mass carried by each particle."""
        return self.rho / self.count

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.velocities.copy(), self.rho)


@dataclass(frozen=True)
class EnsembleMoments:
    rho: float
    momentum: np.ndarray
    energy: float
    theta: float
    m: dict


def moments(e: ParticleEnsemble) -> EnsembleMoments:
    """Weighted empirical mass, momentum, energy, temperature and m_k."""
    w = e.weight
    speed_sq = np.einsum("ij,ij->i", e.velocities, e.velocities)
    energy = w * float(np.sum(speed_sq))
    mk = {k: w * float(np.sum(speed_sq ** k)) for k in MOMENT_ORDERS}
    return EnsembleMoments(
        rho=e.rho,
        momentum=w * e.velocities.sum(axis=0),
        energy=energy,
        theta=energy / (e.rho * e.dimension),
        m=mk,
    )


def centered_temperature(e: ParticleEnsemble) -> tuple[np.ndarray, float]:
    """Mean velocity and temperature about the mean."""
    mean = e.velocities.mean(axis=0)
    var = float(np.mean(np.sum((e.velocities - mean) ** 2, axis=1)))
    return mean, var / e.dimension


def energy_dissipation_estimate(e: ParticleEnsemble, mom: AngularMoments,
                                pair_samples: int, rng: np.random.Generator):
    """Unbiased Monte Carlo estimate of D_E(f) = b1 rho^2 E|v_i - v_j|^3.

    Averages |v_i - v_j|^3 over pair_samples uniformly drawn unordered pairs
    with i != j; returns (value, standard error).
    """
    if e.count < 2:
        raise ContractViolationError("need at least two particles")
    if pair_samples < 100:
        raise ContractViolationError("pair_samples must be >= 100")
    n = e.count
    i = rng.integers(0, n, size=pair_samples)
    j = rng.integers(0, n - 1, size=pair_samples)
    j = np.where(j >= i, j + 1, j)
    rel = e.velocities[i] - e.velocities[j]
    cubes = np.linalg.norm(rel, axis=1) ** 3
    scale = mom.b1 * e.rho ** 2
    value = scale * float(np.mean(cubes))
    stderr = scale * float(np.std(cubes, ddof=1)) / np.sqrt(pair_samples)
    return value, stderr


def energy_dissipation_exact(e: ParticleEnsemble, mom: AngularMoments) -> float:
    """Full O(n^2) pair sum, the brute-force oracle for small ensembles."""
    v = e.velocities
    diff = v[:, None, :] - v[None, :, :]
    cubes = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) ** 3
    n = e.count
    mean = float(np.sum(cubes)) / (n * (n - 1))
    return mom.b1 * e.rho ** 2 * mean


# ---------------------------------------------------------------------------
# radial histograms


@dataclass(frozen=True)
class RadialHistogram:
    """Masses of |v| (or |v - mean|) binned over increasing radii."""

    bin_edges: np.ndarray
    bin_masses: np.ndarray
    total_mass: float

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        masses = np.asarray(self.bin_masses, dtype=float)
        if edges.ndim != 1 or masses.ndim != 1 or edges.size != masses.size + 1:
            raise ContractViolationError("need len(edges) == len(masses) + 1")
        if not np.all(np.diff(edges) > 0):
            raise ContractViolationError("bin edges must be strictly increasing")
        if np.any(masses < 0):
            raise ContractViolationError("bin masses must be non-negative")
        if abs(float(np.sum(masses)) - self.total_mass) > 1e-12 * max(self.total_mass, 1.0):
            raise ContractViolationError("bin masses must sum to the total mass")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_masses", masses)


def equal_probability_edges(theta: float, dimension: int, bins: int) -> np.ndarray:
    """Radial bin edges with equal Maxwellian(0, theta) mass per bin.

    |v|^2/(2 theta) is Gamma(N/2)-distributed, so the quantiles come from the
    inverse regularized incomplete gamma function. The last bin is open-ended.
    """
    if bins < 2:
        raise ContractViolationError("need at least two bins")
    q = np.arange(1, bins) / bins
    inner = np.sqrt(2.0 * theta * gammaincinv(dimension / 2.0, q))
    return np.concatenate(([0.0], inner, [np.inf]))


def histogram_masses(e: ParticleEnsemble, edges: np.ndarray,
                     center: np.ndarray | None = None) -> np.ndarray:
    v = e.velocities if center is None else e.velocities - center
    r = np.linalg.norm(v, axis=1)
    idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, edges.size - 2)
    masses = np.bincount(idx, minlength=edges.size - 1).astype(float)
    return masses * e.weight


def radial_histogram(e: ParticleEnsemble, edges: np.ndarray,
                     center: np.ndarray | None = None) -> RadialHistogram:
    masses = histogram_masses(e, edges, center)
    return RadialHistogram(bin_edges=np.asarray(edges, float), bin_masses=masses,
                           total_mass=float(np.sum(masses)))


def maxwellian_bin_masses(rho: float, theta: float, dimension: int,
                          edges: np.ndarray, weight_power: int = 0) -> np.ndarray:
    """Per-bin integrals of a centered Maxwellian, optionally <v>^2-weighted.

    weight_power 0 gives plain masses; weight_power 2 gives
    int_bin M (1 + |v|^2) dv, using the exact radial cumulative integrals.
    """
    half_n = dimension / 2.0
    x = np.asarray(edges, dtype=float) ** 2 / (2.0 * theta)
    x = np.where(np.isfinite(x), x, np.inf)
    mass_cdf = np.where(np.isinf(x), 1.0, gammainc(half_n, np.where(np.isinf(x), 0.0, x)))
    masses = rho * np.diff(mass_cdf)
    if weight_power == 0:
        return masses
    if weight_power != 2:
        raise ContractViolationError("weight_power must be 0 or 2")
    e_cdf = np.where(np.isinf(x), 1.0, gammainc(half_n + 1.0, np.where(np.isinf(x), 0.0, x)))
    second_moment = rho * dimension * theta * np.diff(e_cdf)
    return masses + second_moment


def density_bin_masses(density, dimension: int, edges: np.ndarray,
                       weight_power: int = 0) -> np.ndarray:
    """Per-bin integrals of an isotropic reference density given as f(r)."""
    area = sphere_area(dimension - 1)

    def integrand(r):
        w = 1.0 + r * r if weight_power == 2 else 1.0
        return area * r ** (dimension - 1) * density(r) * w

    out = np.empty(edges.size - 1)
    for b in range(out.size):
        hi = edges[b + 1]
        if np.isinf(hi):
            # open-ended tail: integrate to a generous finite radius
            hi = 4.0 * edges[b] + 10.0
        out[b], _ = quad(integrand, edges[b], hi, epsabs=1e-14, epsrel=1e-10, limit=200)
    return out


def weighted_bin_masses(e: ParticleEnsemble, edges: np.ndarray,
                        weight_power: int = 0,
                        center: np.ndarray | None = None) -> np.ndarray:
    """Empirical per-bin mass with the <v>^weight_power weight."""
    v = e.velocities if center is None else e.velocities - center
    r = np.linalg.norm(v, axis=1)
    idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, edges.size - 2)
    if weight_power == 0:
        w = np.ones_like(r)
    elif weight_power == 2:
        w = 1.0 + r * r
    else:
        raise ContractViolationError("weight_power must be 0 or 2")
    return np.bincount(idx, weights=w, minlength=edges.size - 1) * e.weight


def relative_entropy_estimate(e: ParticleEnsemble, bins: int = 64,
                              reference=None) -> float:
    """Plug-in estimate of H(g | M) from the radial histogram.

    M defaults to the matched Maxwellian M[g] (same mass, mean and
    temperature); pass a centered gaussian.MaxwellianParams to compare
    against a fixed reference instead. Bins are equal-probability under the
    ensemble's own matched Maxwellian (the partition must resolve where g
    puts mass); velocities are binned about their mean so the reference is
    centered. Empty bins contribute zero; the result is clamped at zero
    (the plug-in estimator has positive bias, not corrected here).
    """
    mean, theta = centered_temperature(e)
    if not theta > 0:
        raise ContractViolationError("degenerate ensemble (theta = 0)")
    if reference is None:
        ref_rho, ref_theta = e.rho, theta
    else:
        if not reference.is_centered:
            raise ContractViolationError("reference Maxwellian must be centered")
        ref_rho, ref_theta = reference.rho, reference.theta
    edges = equal_probability_edges(theta, e.dimension, bins)
    m = histogram_masses(e, edges, center=mean)
    q = maxwellian_bin_masses(ref_rho, ref_theta, e.dimension, edges)
    filled = m > 0
    h = float(np.sum(m[filled] * np.log(m[filled] / q[filled])))
    return max(h, 0.0)


def l1_histogram_distance(masses_a: np.ndarray, masses_b: np.ndarray) -> float:
    return float(np.sum(np.abs(masses_a - masses_b)))


def l1_distance(e: ParticleEnsemble, reference, weight_power: int = 0,
                bins: int = 64, edges: np.ndarray | None = None) -> float:
    """Radial-histogram approximation of int |g - reference| <v>^p dv.

    reference is either a gaussian.MaxwellianParams (exact per-bin integrals)
    or a callable radial density f(r). Binning defaults to equal-probability
    bins under the ensemble's matched Maxwellian.
    """
    from .gaussian import MaxwellianParams

    if edges is None:
        _, theta = centered_temperature(e)
        edges = equal_probability_edges(theta, e.dimension, bins)
    emp = weighted_bin_masses(e, edges, weight_power)
    if isinstance(reference, MaxwellianParams):
        if not reference.is_centered:
            raise ContractViolationError("reference Maxwellian must be centered")
        ref = maxwellian_bin_masses(reference.rho, reference.theta, e.dimension,
                                    edges, weight_power)
    else:
        ref = density_bin_masses(reference, e.dimension, edges, weight_power)
    return l1_histogram_distance(emp, ref)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time-stamped row of scalar observables (one CSV line)."""

    t: float
    rho: float
    momentum: np.ndarray
    energy: float
    theta: float
    m_half: float
    m_32: float
    m_2: float
    m_3: float
    de_est: float
    de_se: float
    rel_entropy: float
    l1_dist: float
    collisions: int
    replica: int = 0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.momentum, dtype=float))
        if p.size < 3:
            p = np.concatenate([p, np.zeros(3 - p.size)])
        object.__setattr__(self, "momentum", p)
        scalars = (self.t, self.rho, self.energy, self.theta, self.m_half,
                   self.m_32, self.m_2, self.m_3, self.de_est, self.de_se,
                   self.rel_entropy, self.l1_dist)
        if not (np.all(np.isfinite(p)) and all(np.isfinite(s) for s in scalars)):
            raise ContractViolationError("diagnostics entries must be finite")


def build_record(e: ParticleEnsemble, t: float, mom: AngularMoments,
                 rng: np.random.Generator, pair_samples: int = 2048,
                 bins: int = 64, l1_reference=None, collisions: int = 0,
                 replica: int = 0) -> DiagnosticsRecord:
    """Assemble the full diagnostics row for one ensemble snapshot.

    l1_reference defaults to the matched Maxwellian (weighted L1_2 distance,
    then a pure noise-floor measurement); pass a MaxwellianParams to compare
    against a fixed reference instead.
    """
    from .gaussian import MaxwellianParams

    em = moments(e)
    if l1_reference is None:
        mean, theta_c = centered_temperature(e)
        l1_reference = MaxwellianParams.isotropic(e.rho, theta_c, e.dimension)
    de, se = energy_dissipation_estimate(e, mom, pair_samples, rng)
    return DiagnosticsRecord(
        t=t, rho=em.rho, momentum=em.momentum, energy=em.energy, theta=em.theta,
        m_half=em.m[0.5], m_32=em.m[1.5], m_2=em.m[2.0], m_3=em.m[3.0],
        de_est=de, de_se=se,
        rel_entropy=relative_entropy_estimate(e, bins=bins),
        l1_dist=l1_distance(e, l1_reference, weight_power=2, bins=bins),
        collisions=collisions, replica=replica,
    )


# ---------------------------------------------------------------------------
# steady-state checks


@dataclass(frozen=True)
class EnergyBounds:
    lower_ok: bool
    upper_ok: bool
    energy: float
    lower_bound: float
    upper_bound: float


def energy_bounds_check(e: ParticleEnsemble, alpha: float,
                        mom: AngularMoments) -> EnergyBounds:
    """A-priori energy bounds for rescaled steady states.

    Upper bound E <= 4 rho / b1^2 (Jensen + Hoelder on the profile energy
    balance). Lower bound E >= N^2 alpha^4 rho / (2 (1+alpha)^2 b2^2), the
    entropy-argument bound with the cross-section L1 norm written out.
    """
    em = moments(e)
    n = e.dimension
    upper = 4.0 * e.rho / mom.b1 ** 2
    lower = n * n * alpha ** 4 * e.rho / (2.0 * (1.0 + alpha) ** 2 * mom.b2 ** 2)
    return EnergyBounds(lower_ok=em.energy >= lower, upper_ok=em.energy <= upper,
                        energy=em.energy, lower_bound=lower, upper_bound=upper)


def povzner_envelope(em: EnsembleMoments, orders=(1.0, 1.5, 2.0, 3.0)):
    """Smallest X with m_k / rho <= Gamma(k + 1/2) X^k for all listed k.

    m_1 (the energy) is included via the exact identity m_1 = energy. Returns
    (X, per-order ratios at that X); a bounded spread of the per-order X_k is
    the monotone-envelope diagnostic for Gaussian-type moment growth.
    """
    xs = {}
    for k in orders:
        mk = em.energy if k == 1.0 else em.m[k]
        xs[k] = (mk / (em.rho * gamma(k + 0.5))) ** (1.0 / k)
    x = max(xs.values())
    ratios = {k: (xs[k] / x) for k in xs}
    return x, ratios
