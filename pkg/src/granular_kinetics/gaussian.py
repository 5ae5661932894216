"""Maxwellian distributions and deterministic quadrature oracles.

Every closed-form Gaussian quantity used to verify the particle solver lives
here: radial moments, the two pair moments int M M* |u|^3 and
int M M* |v|^2 |u|^3, the concave energy-balance function Psi(theta), the
quasi-elastic self-similar temperature theta_bar_1 (the unique positive root
of Psi), and the first-order energy-relaxation identity built from the
eigenfunction phi_1 = c0 (|v|^2 - N theta_bar_1) M_{rho,0,theta_bar_1}.

Multi-dimensional pair integrals are reduced to 1-D radial integrals via the
orthogonal change of variables x = (v+v*)/sqrt(2), y = (v-v*)/sqrt(2) before
quadrature, so the quadrature side stays independent of the Gamma-function
closed forms it is checked against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from .errors import ContractViolationError, NumericalError
from .kernel import AngularMoments, sphere_area


@dataclass(frozen=True)
class MaxwellianParams:
    """Maxwellian with mass rho, mean velocity u and temperature theta.

    Density rho (2 pi theta)^(-N/2) exp(-|v-u|^2 / (2 theta)); it integrates
    to rho and, for u = 0, has kinetic energy N rho theta.
    """

    rho: float
    u: np.ndarray
    theta: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ContractViolationError("rho must be positive")
        if not self.theta > 0:
            raise ContractViolationError("theta must be positive")
        object.__setattr__(self, "u", np.atleast_1d(np.asarray(self.u, dtype=float)))

    @classmethod
    def isotropic(cls, rho: float, theta: float, dimension: int) -> "MaxwellianParams":
        return cls(rho=rho, u=np.zeros(dimension), theta=theta)

    @property
    def dimension(self) -> int:
        return self.u.size

    @property
    def is_centered(self) -> bool:
        return bool(np.all(self.u == 0.0))


@dataclass(frozen=True)
class TheoryConstants:
    """Derived constants of the quasi-elastic limit for one (b, N, rho).

    theta_bar_1: quasi-elastic self-similar temperature (rho-independent);
    E_bar_1 = rho N theta_bar_1; k1 = rho^2 N and
    k2 = 2^(3/2) rho^2 b1 m_{3/2}(M_{1,0,1}) are the coefficients of
    Psi(theta) = k1 theta - k2 theta^(3/2); c0 normalizes phi_1 in L^1_2.
    """

    theta_bar_1: float
    E_bar_1: float
    k1: float
    k2: float
    c0: float


def maxwellian_density(p: MaxwellianParams, v) -> np.ndarray | float:
    """Pointwise Maxwellian density; v may be one point (N,) or a batch (m, N)."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    pts = np.atleast_2d(v)
    if pts.shape[1] != p.dimension:
        raise ContractViolationError("point dimension does not match parameters")
    dsq = np.sum((pts - p.u) ** 2, axis=1)
    out = p.rho * (2.0 * np.pi * p.theta) ** (-p.dimension / 2.0) \
        * np.exp(-dsq / (2.0 * p.theta))
    return float(out[0]) if single else out


def radial_moment(p: MaxwellianParams, k: float) -> float:
    """Homogeneous moment m_k = int M |v|^(2k) dv of a centered Maxwellian.

    Closed form rho theta^k 2^k Gamma(k + N/2) / Gamma(N/2), valid for 2k > -N.
    """
    if not p.is_centered:
        raise ContractViolationError("radial_moment requires a centered Maxwellian")
    n = p.dimension
    if not 2.0 * k > -n:
        raise ContractViolationError("need 2k > -N for integrability")
    return p.rho * p.theta ** k * 2.0 ** k * gamma(k + n / 2.0) / gamma(n / 2.0)


def _tail_radius(theta: float, k: float) -> float:
    # chosen so the Gaussian tail mass beyond R is < 1e-16 for all moments in use
    return np.sqrt(2.0 * theta) * np.sqrt(40.0 + max(k, 0.0) * np.log(40.0))


def radial_moment_quad(p: MaxwellianParams, k: float) -> float:
    """radial_moment by adaptive quadrature of the radial integrand.

    Integrates on [0, R] with a Gaussian-tail cutoff R, then doubles R once
    to confirm the truncation; disagreement raises NumericalError.
    """
    if not p.is_centered:
        raise ContractViolationError("radial_moment_quad requires a centered Maxwellian")
    n = p.dimension
    if not 2.0 * k > -n:
        raise ContractViolationError("need 2k > -N for integrability")
    pref = p.rho * (2.0 * np.pi * p.theta) ** (-n / 2.0) * sphere_area(n - 1)

    def integrand(r):
        return r ** (n - 1 + 2.0 * k) * np.exp(-r * r / (2.0 * p.theta))

    radius = _tail_radius(p.theta, k)
    vals = []
    for r_max in (radius, 2.0 * radius):
        val, _err = quad(integrand, 0.0, r_max, epsabs=0.0, epsrel=1e-13, limit=200)
        vals.append(pref * val)
    if abs(vals[1] - vals[0]) > 1e-11 * max(abs(vals[1]), 1e-300):
        raise NumericalError("radial quadrature truncation did not converge",
                             residual=abs(vals[1] - vals[0]))
    return vals[1]


def pair_moment_u3(p: MaxwellianParams, quadrature: bool = True) -> float:
    """int int M M* |v - v*|^3 dv dv* for a centered Maxwellian pair.

    The change of variables x = (v+v*)/sqrt(2), y = (v-v*)/sqrt(2) maps the
    pair integral to rho^2 2^(3/2) m_{3/2}(M_{1,0,theta}); the remaining 1-D
    radial integral is evaluated by quadrature (or the closed form).
    """
    if not p.is_centered:
        raise ContractViolationError("pair_moment_u3 requires a centered Maxwellian")
    unit = MaxwellianParams.isotropic(1.0, p.theta, p.dimension)
    m32 = radial_moment_quad(unit, 1.5) if quadrature else radial_moment(unit, 1.5)
    return p.rho ** 2 * 2.0 ** 1.5 * m32


def pair_moment_v2u3(p: MaxwellianParams, quadrature: bool = True) -> float:
    """int int M M* |v|^2 |v - v*|^3 dv dv* for a centered Maxwellian pair.

    Reduces to rho^2 sqrt(2) [N theta m_{3/2} + m_{5/2}] (unit-mass moments at
    temperature theta); the |v|^2 weight may sit on either argument.
    """
    if not p.is_centered:
        raise ContractViolationError("pair_moment_v2u3 requires a centered Maxwellian")
    n = p.dimension
    unit = MaxwellianParams.isotropic(1.0, p.theta, n)
    if quadrature:
        m32 = radial_moment_quad(unit, 1.5)
        m52 = radial_moment_quad(unit, 2.5)
    else:
        m32 = radial_moment(unit, 1.5)
        m52 = radial_moment(unit, 2.5)
    return p.rho ** 2 * np.sqrt(2.0) * (n * p.theta * m32 + m52)


def energy_dissipation_maxwellian(p: MaxwellianParams, moments: AngularMoments) -> float:
    """D_E(M) = b1 int int M M* |u|^3, the Gaussian dissipation-rate oracle."""
    return moments.b1 * pair_moment_u3(p, quadrature=False)


def psi(theta: float, tc: TheoryConstants) -> float:
    """Energy-balance function Psi(theta) = k1 theta - k2 theta^(3/2).

    Strictly concave on (0, inf), positive below theta_bar_1, zero at it,
    negative above.
    """
    if not theta > 0:
        raise ContractViolationError("theta must be positive")
    return tc.k1 * theta - tc.k2 * theta ** 1.5


def _phi1_normalizer(theta_bar: float, rho: float, dimension: int) -> float:
    """c0 with ||phi_1||_{L^1_2} = 1, by quadrature split at the sign change.

    phi_1 = c0 (|v|^2 - N theta_bar) M_{rho,0,theta_bar}; the L^1_2 weight is
    <v>^2 = 1 + |v|^2.
    """
    n = dimension
    pref = rho * (2.0 * np.pi * theta_bar) ** (-n / 2.0) * sphere_area(n - 1)

    def integrand(r):
        return abs(r * r - n * theta_bar) * (1.0 + r * r) \
            * r ** (n - 1) * np.exp(-r * r / (2.0 * theta_bar))

    r_split = np.sqrt(n * theta_bar)
    r_max = max(_tail_radius(theta_bar, 2.0), 2.0 * r_split)
    lo, _ = quad(integrand, 0.0, r_split, epsabs=0.0, epsrel=1e-12, limit=200)
    hi, _ = quad(integrand, r_split, r_max, epsabs=0.0, epsrel=1e-12, limit=200)
    norm = pref * (lo + hi)
    if not norm > 0:
        raise NumericalError("phi_1 normalization integral vanished", residual=norm)
    return 1.0 / norm


def quasi_elastic_temperature(moments: AngularMoments, dimension: int,
                              rho: float = 1.0) -> TheoryConstants:
    """theta_bar_1 = N^2 / (8 b1^2 m_{3/2}(M_{1,0,1})^2) and its companions.

    Also computes k1 = rho^2 N and k2 = 2^(3/2) rho^2 b1 m_{3/2} and verifies
    theta_bar_1 = (k1/k2)^2 and Psi(theta_bar_1) = 0 at the 1e-12 level.
    """
    if not moments.b1 > 0:
        raise ContractViolationError("b1 must be positive")
    n = dimension
    m32 = radial_moment(MaxwellianParams.isotropic(1.0, 1.0, n), 1.5)
    theta_bar = n * n / (8.0 * moments.b1 ** 2 * m32 ** 2)
    k1 = rho * rho * n
    k2 = 2.0 ** 1.5 * rho * rho * moments.b1 * m32
    if abs((k1 / k2) ** 2 - theta_bar) > 1e-12 * theta_bar:
        raise NumericalError("theta_bar_1 != (k1/k2)^2",
                             residual=abs((k1 / k2) ** 2 - theta_bar))
    tc = TheoryConstants(theta_bar_1=theta_bar, E_bar_1=rho * n * theta_bar,
                         k1=k1, k2=k2,
                         c0=_phi1_normalizer(theta_bar, rho, n))
    root_resid = abs(psi(theta_bar, tc))
    if root_resid > 1e-12 * k1 * theta_bar:
        raise NumericalError("Psi(theta_bar_1) != 0", residual=root_resid)
    return tc


def energy_eigen_identity(moments: AngularMoments, tc: TheoryConstants,
                          rho: float, dimension: int):
    """Quadrature check of the first-order energy-relaxation eigenvalue.

    With phi_1 = c0 (|v|^2 - N theta_bar_1) G_bar and the symmetric
    dissipation form D~(g, h) = b1 int int g h* |u|^3, the limiting
    eigenvalue relation reads 2 rho E(phi_1) - 4 D~ = -rho E(phi_1); the
    returned residual |2 rho E(phi_1) - 4 D~ + rho E(phi_1)| vanishes iff
    the relaxation rate is -rho to first order in (1 - alpha).
    """
    n = dimension
    theta_bar = tc.theta_bar_1
    c0 = _phi1_normalizer(theta_bar, rho, n)
    pref = rho * (2.0 * np.pi * theta_bar) ** (-n / 2.0) * sphere_area(n - 1)

    def e_integrand(r):
        return (r * r - n * theta_bar) * r * r \
            * r ** (n - 1) * np.exp(-r * r / (2.0 * theta_bar))

    r_max = _tail_radius(theta_bar, 2.0)
    val, _ = quad(e_integrand, 0.0, r_max, epsabs=0.0, epsrel=1e-12, limit=200)
    e_phi1 = c0 * pref * val

    # D~(G_bar, phi_1) reduces (same x,y rotation as the pair moments) to
    # sqrt(2) b1 c0 rho^2 (m_{5/2} - N theta_bar m_{3/2}) at temperature theta_bar
    unit = MaxwellianParams.isotropic(1.0, theta_bar, n)
    m32 = radial_moment_quad(unit, 1.5)
    m52 = radial_moment_quad(unit, 2.5)
    d_tilde = np.sqrt(2.0) * moments.b1 * c0 * rho * rho * (m52 - n * theta_bar * m32)

    residual = abs(2.0 * rho * e_phi1 - 4.0 * d_tilde + rho * e_phi1)
    return e_phi1, d_tilde, residual


def sample_maxwellian(p: MaxwellianParams, count: int, rng: np.random.Generator,
                      zero_momentum: bool = False):
    """Ensemble of count i.i.d. draws from the Maxwellian (mass set to rho)."""
    from .ensemble import ParticleEnsemble

    if count < 2:
        raise ContractViolationError("need at least two particles")
    v = p.u + np.sqrt(p.theta) * rng.standard_normal((count, p.dimension))
    return ParticleEnsemble(velocities=v, rho=p.rho, zero_momentum=zero_momentum)


def selftest(dimensions=(2, 3), rhos=(0.5, 1.0, 2.0), b1_3d: float = np.pi / 2.0,
             tol: float = 1e-8):
    """Residual table for every Gaussian identity, over N and rho grids.

    For N = 3 the angular moments of the unit constant kernel are used; for
    other N a flat tabulated kernel with the same b'_0 = 1 normalization.
    Returns a list of dict rows with keys name/N/rho/lhs/rhs/residual/ok.
    """
    from .kernel import CrossSection, angular_moments

    rows = []

    def record(name, n, rho, lhs, rhs, tolerance=tol, absolute=False):
        resid = abs(lhs - rhs) if absolute else abs(lhs - rhs) / max(abs(rhs), 1e-300)
        rows.append({"name": name, "N": n, "rho": rho, "lhs": lhs, "rhs": rhs,
                     "residual": resid, "tol": tolerance, "ok": resid <= tolerance})

    for n in dimensions:
        if n == 3:
            cs = CrossSection.constant_3d(b1_3d * 2.0 / np.pi)
        else:
            cs = CrossSection.tabulated([-1.0, 1.0], [1.0, 1.0], dimension=n)
        mom = angular_moments(cs)
        for rho in rhos:
            p = MaxwellianParams.isotropic(rho, 1.0, n)
            unit = MaxwellianParams.isotropic(1.0, 1.0, n)
            m32_closed = radial_moment(unit, 1.5)

            record("Mv2", n, rho, radial_moment_quad(p, 1.0), rho * n)
            record("Mv4", n, rho, radial_moment_quad(p, 2.0), rho * n * (n + 2))
            record("MMu3", n, rho, pair_moment_u3(p),
                   rho * rho * 2.0 ** 1.5 * m32_closed)
            record("MMv2u3", n, rho, pair_moment_v2u3(p),
                   rho * rho * np.sqrt(2.0) * (2 * n + 3) * m32_closed)

            tc = quasi_elastic_temperature(mom, n, rho)
            record("Psi(theta_bar_1)=0", n, rho,
                   psi(tc.theta_bar_1, tc) / (tc.k1 * tc.theta_bar_1), 0.0,
                   absolute=True)

            e_phi1, _d_tilde, resid = energy_eigen_identity(mom, tc, rho, n)
            record("eigen residual", n, rho, resid / (rho * e_phi1), 0.0,
                   absolute=True)

            # fixed point rho E(M_theta_bar) = D_E(M_theta_bar)
            m_bar = MaxwellianParams.isotropic(rho, tc.theta_bar_1, n)
            record("profile energy fixed point", n, rho,
                   rho * radial_moment(m_bar, 1.0),
                   energy_dissipation_maxwellian(m_bar, mom))
    return rows


def format_selftest(rows) -> str:
    lines = ["identity                       N  rho    residual      tol     status"]
    for r in rows:
        lines.append(
            f"{r['name']:<30} {r['N']:>2} {r['rho']:>4.2g}  {r['residual']:.3e}"
            f"  {r['tol']:.1e}  {'pass' if r['ok'] else 'FAIL'}")
    return "\n".join(lines)
