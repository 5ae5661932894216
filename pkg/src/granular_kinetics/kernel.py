"""Collision kinematics and cross-section geometry.

Binary inelastic hard-sphere collisions with constant normal restitution
alpha: post-collision velocities, per-collision kinetic-energy change,
angular moments of the cross-section b(uhat.sigma), and sampling of the
scattering direction sigma on the unit sphere.

All velocities are flat numpy arrays of length N (or (m, N) batches in the
vectorized helpers used by the DSMC stepper). Everything here is a pure
function of its arguments plus an explicitly passed numpy Generator.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma

from .errors import ContractViolationError, NumericalError, SamplingError

SIGMA_UNIT_TOL = 1e-12
REJECTION_CAP = 10_000


def sphere_area(m: int) -> float:
    """Surface measure of the unit sphere S^m embedded in R^(m+1)."""
    return 2.0 * np.pi ** ((m + 1) / 2.0) / gamma((m + 1) / 2.0)


@dataclass(frozen=True)
class AngularMoments:
    """Scalar integrals of the angular cross-section over the sphere.

    b0 = int_{S^{N-1}} b(sigma_1) dsigma       (total collision rate factor)
    b1 = (1/8) int (1 - uhat.sigma) b dsigma   (energy-dissipation factor)
    b2 = int |b(sigma_1)| dsigma               (L1 norm on the sphere)
    """

    b0: float
    b1: float
    b2: float

    def __post_init__(self):
        if not (self.b0 > 0 and self.b1 > 0 and self.b2 > 0):
            raise ContractViolationError("angular moments must be strictly positive")

    def scaled(self, lam: float) -> "AngularMoments":
        return AngularMoments(lam * self.b0, lam * self.b1, lam * self.b2)


@dataclass(frozen=True)
class CrossSection:
    """Angular cross-section b(x), x = uhat.sigma, on [-1, 1].

    Two forms:
      * constant: b(x) = b0prime, the 3-D hard-sphere kernel (N = 3 only);
      * tabulated: piecewise-linear samples of b on [-1, 1], any N >= 2,
        required to be positive, bounded and non-decreasing.
    """

    dimension: int
    b0prime: float | None = None
    table_x: np.ndarray | None = field(default=None, repr=False)
    table_b: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dimension < 2:
            raise ContractViolationError("dimension must be >= 2")
        if (self.b0prime is None) == (self.table_x is None):
            raise ContractViolationError(
                "exactly one of b0prime / table must be given")
        if self.b0prime is not None:
            if self.dimension != 3:
                raise ContractViolationError(
                    "the constant hard-sphere kernel is only valid for N = 3")
            if not self.b0prime > 0:
                raise ContractViolationError("b0prime must be positive")
        else:
            x = np.asarray(self.table_x, dtype=float)
            b = np.asarray(self.table_b, dtype=float)
            if x.ndim != 1 or x.shape != b.shape or x.size < 2:
                raise ContractViolationError("table must be two equal 1-d arrays")
            if not (x[0] == -1.0 and x[-1] == 1.0 and np.all(np.diff(x) > 0)):
                raise ContractViolationError("table abscissae must increase from -1 to 1")
            if not np.all(b > 0):
                raise ContractViolationError("tabulated b must be strictly positive")
            if np.any(np.diff(b) < 0):
                raise ContractViolationError("tabulated b must be non-decreasing")
            object.__setattr__(self, "table_x", x)
            object.__setattr__(self, "table_b", b)

    @classmethod
    def constant_3d(cls, b0prime: float = 1.0) -> "CrossSection":
        return cls(dimension=3, b0prime=b0prime)

    @classmethod
    def tabulated(cls, x, b, dimension: int = 3) -> "CrossSection":
        return cls(dimension=dimension, table_x=np.asarray(x, float),
                   table_b=np.asarray(b, float))

    @property
    def is_constant(self) -> bool:
        return self.b0prime is not None

    @property
    def b_max(self) -> float:
        return self.b0prime if self.is_constant else float(np.max(self.table_b))

    def evaluate(self, x):
        """b(x) for x = uhat.sigma in [-1, 1] (piecewise-linear for tables)."""
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.full_like(x, self.b0prime)
        return np.interp(x, self.table_x, self.table_b)


@dataclass(frozen=True)
class RestitutionParams:
    """Restitution coefficient, gas mass, and the anti-drift rate tau = rho(1-alpha)."""

    alpha: float
    rho: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolationError("alpha must lie in [0, 1]")
        if not self.rho > 0:
            raise ContractViolationError("rho must be positive")

    @property
    def tau_alpha(self) -> float:
        return self.rho * (1.0 - self.alpha)


def _check_sigma(sigma: np.ndarray):
    err = abs(float(np.dot(sigma, sigma)) - 1.0)
    if err > 2.0 * SIGMA_UNIT_TOL:
        raise ContractViolationError(f"sigma is not a unit vector (|sigma|^2 - 1 = {err:g})")


def post_collision(v, v_star, sigma, alpha):
    """Post-collision velocities (v', v'_*) of an inelastic binary collision.

    v' = w/2 + u'/2, v'_* = w/2 - u'/2 with w = v + v_*,
    u' = ((1-alpha)/2) u + ((1+alpha)/2) |u| sigma, u = v - v_*.
    Momentum v' + v'_* = w is conserved by construction. Degenerate pairs
    (u = 0) are returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolationError("alpha must lie in [0, 1]")
    _check_sigma(sigma)
    u = v - v_star
    speed = float(np.linalg.norm(u))
    if speed == 0.0:
        return v.copy(), v_star.copy()
    w_half = 0.5 * (v + v_star)
    u_prime_half = 0.25 * (1.0 - alpha) * u + 0.25 * (1.0 + alpha) * speed * sigma
    return w_half + u_prime_half, w_half - u_prime_half


def collision_energy_delta(v, v_star, sigma, alpha):
    """Kinetic-energy change |v'|^2+|v'_*|^2-|v|^2-|v_*|^2 in closed form.

    Equals -((1-alpha^2)/4)(1 - uhat.sigma)|u|^2; always <= 0.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolationError("alpha must lie in [0, 1]")
    _check_sigma(sigma)
    u = v - v_star
    usq = float(np.dot(u, u))
    if usq == 0.0:
        return 0.0
    cos_theta = float(np.dot(u, sigma)) / np.sqrt(usq)
    return -0.25 * (1.0 - alpha * alpha) * (1.0 - cos_theta) * usq


def post_collision_pairs(vi, vj, sigma, alpha):
    """Vectorized post_collision for (m, N) arrays of collision partners.

    Returns (vi_prime, vj_prime, delta) where delta is the per-collision
    kinetic-energy change (unweighted, i.e. |v'|^2+|v'*|^2-|v|^2-|v*|^2).
    Inputs are trusted (the DSMC stepper validates its own state).
    """
    u = vi - vj
    speed = np.linalg.norm(u, axis=1)
    # degenerate pairs keep u' = u (identity collision, delta = 0)
    safe = speed > 0.0
    w_half = 0.5 * (vi + vj)
    u_prime_half = 0.25 * (1.0 - alpha) * u
    u_prime_half = u_prime_half + np.where(
        safe[:, None], 0.25 * (1.0 + alpha) * speed[:, None] * sigma, 0.25 * (1.0 + alpha) * u)
    vi_p = w_half + u_prime_half
    vj_p = w_half - u_prime_half
    cos_theta = np.where(safe, np.einsum("ij,ij->i", u, sigma) / np.where(safe, speed, 1.0), 1.0)
    delta = -0.25 * (1.0 - alpha * alpha) * (1.0 - cos_theta) * speed**2
    return vi_p, vj_p, delta


def _weight_cumulative(t: np.ndarray, p: float, extra: int = 0) -> np.ndarray:
    """int_{-1}^{x} s^extra (1-s^2)^p ds at t = (x+1)/2, for extra in {0, 1, 2}.

    With s = 2t - 1 the even pieces are regularized incomplete beta
    functions; the odd piece is elementary.
    """
    if extra == 1:
        x = 2.0 * t - 1.0
        return -(1.0 - x * x) ** (p + 1.0) / (2.0 * (p + 1.0))
    q = p + (1.0 if extra == 2 else 0.0)
    even = 2.0 * 4.0 ** q * beta_fn(q + 1.0, q + 1.0) * betainc(q + 1.0, q + 1.0, t)
    if extra == 0:
        return even
    # x^2 (1-x^2)^p = (1-x^2)^p - (1-x^2)^(p+1)
    return _weight_cumulative(t, p, 0) - even


def angular_moments(cs: CrossSection) -> AngularMoments:
    """Compute (b0, b1, b2) exactly for both cross-section forms.

    The sphere integral reduces to x = uhat.sigma with the surface-measure
    factor |S^{N-2}| (1-x^2)^((N-3)/2). For piecewise-linear tables the
    weighted integrals over each segment are incomplete-beta closed forms,
    so no quadrature error enters.
    """
    n = cs.dimension
    if cs.is_constant:
        # N = 3: the x-weight is flat, so everything is elementary
        b0p = cs.b0prime
        b0 = sphere_area(2) * b0p              # 4 pi b0'
        b1 = 0.125 * 2.0 * np.pi * 2.0 * b0p   # (1/8) * 2pi * int(1-x)dx = pi/2 b0'
        return AngularMoments(b0=b0, b1=b1, b2=b0)

    ring = sphere_area(n - 2)
    p = 0.5 * (n - 3)
    x, b = cs.table_x, cs.table_b
    t = 0.5 * (x + 1.0)
    w0 = np.diff(_weight_cumulative(t, p, 0))
    w1 = np.diff(_weight_cumulative(t, p, 1))
    w2 = np.diff(_weight_cumulative(t, p, 2))
    # on each segment b(x) = c0 + c1 x
    c1 = np.diff(b) / np.diff(x)
    c0 = b[:-1] - c1 * x[:-1]
    int_b = float(np.sum(c0 * w0 + c1 * w1))
    int_xb = float(np.sum(c0 * w1 + c1 * w2))
    b0 = ring * int_b
    b1 = 0.125 * ring * (int_b - int_xb)
    b2 = ring * int_b  # b > 0 on [-1, 1] by the table invariant
    if not np.isfinite(b0) or not np.isfinite(b1):
        raise NumericalError("angular-moment integrals are not finite",
                             residual=float("nan"))
    return AngularMoments(b0=b0, b1=b1, b2=b2)


def _uniform_sphere(count: int, dimension: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, dimension))
    norms = np.linalg.norm(g, axis=1)
    # a all-zero Gaussian draw has probability 0; regenerate defensively
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(np.sum(bad)), dimension))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def sample_sigma_batch(u_hat: np.ndarray, cs: CrossSection,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw one sigma per row of u_hat with density b(uhat.sigma)/b0 on S^{N-1}.

    Constant kernel: uniform on the sphere. Tabulated kernel: rejection
    against the uniform proposal with bound b_max; the acceptance rate is
    at least b_min/b_max, and the loop is capped at REJECTION_CAP rounds.
    """
    u_hat = np.atleast_2d(np.asarray(u_hat, dtype=float))
    m, n = u_hat.shape
    sigma = _uniform_sphere(m, n, rng)
    if cs.is_constant:
        return sigma
    b_max = cs.b_max
    pending = np.flatnonzero(cs.evaluate(np.einsum("ij,ij->i", u_hat, sigma))
                             < rng.random(m) * b_max)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > REJECTION_CAP:
            raise SamplingError(
                f"sigma rejection sampling exceeded {REJECTION_CAP} rounds")
        prop = _uniform_sphere(pending.size, n, rng)
        accept = cs.evaluate(np.einsum("ij,ij->i", u_hat[pending], prop)) \
            >= rng.random(pending.size) * b_max
        sigma[pending[accept]] = prop[accept]
        pending = pending[~accept]
    return sigma


def sample_sigma(u_hat, cs: CrossSection, rng: np.random.Generator) -> np.ndarray:
    """Single-draw convenience wrapper around sample_sigma_batch."""
    u_hat = np.asarray(u_hat, dtype=float)
    norm = float(np.linalg.norm(u_hat))
    if abs(norm - 1.0) > 1e-9:
        raise ContractViolationError("u_hat must be a unit vector")
    if u_hat.size != cs.dimension:
        raise ContractViolationError("u_hat dimension does not match cross-section")
    return sample_sigma_batch(u_hat[None, :], cs, rng)[0]
