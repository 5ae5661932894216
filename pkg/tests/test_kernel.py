"""Collision kinematics and cross-section geometry tests."""

import numpy as np
import pytest
from scipy.stats import chi2

from granular_kinetics.errors import ContractViolationError
from granular_kinetics.kernel import (AngularMoments, CrossSection,
                                      RestitutionParams, angular_moments,
                                      collision_energy_delta, post_collision,
                                      post_collision_pairs, sample_sigma,
                                      sample_sigma_batch, sphere_area)


def random_collisions(rng, m, dim=3, alpha=None):
    v = rng.standard_normal((m, dim)) * rng.uniform(0.2, 3.0, (m, 1))
    w = rng.standard_normal((m, dim)) * rng.uniform(0.2, 3.0, (m, 1))
    sigma = rng.standard_normal((m, dim))
    sigma /= np.linalg.norm(sigma, axis=1, keepdims=True)
    if alpha is None:
        alpha = rng.uniform(0.0, 1.0)
    return v, w, sigma, alpha


def test_elastic_aligned_sigma_is_identity():
    v, vs = post_collision([1.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0], 1.0)
    assert np.allclose(v, [1, 0, 0], atol=0) and np.allclose(vs, [-1, 0, 0], atol=0)


def test_hand_evaluated_example():
    v, vs = post_collision([1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], 0.9)
    assert np.allclose(v, [0.05, 0.95, 0.0], rtol=0, atol=1e-15)
    assert np.allclose(vs, [-0.05, -0.95, 0.0], rtol=0, atol=1e-15)
    delta = collision_energy_delta([1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], 0.9)
    assert delta == pytest.approx(-0.19, abs=1e-15)


def test_momentum_conserved_to_4_ulps():
    rng = np.random.default_rng(7)
    for _ in range(200):
        v, w, sigma, alpha = random_collisions(rng, 50)
        vp, wp, _ = post_collision_pairs(v, w, sigma, alpha)
        lhs = vp + wp
        rhs = v + w
        scale = np.max(np.abs(np.stack([v, w, vp, wp])), axis=0)
        assert np.all(np.abs(lhs - rhs) <= 4.0 * np.spacing(np.maximum(scale, 1e-300)))


def test_energy_delta_matches_velocities():
    # randomized property sweep: closed form vs |v'|^2+|v'*|^2-|v|^2-|v*|^2
    rng = np.random.default_rng(11)
    total = 0
    while total < 10**5:
        v, w, sigma, alpha = random_collisions(rng, 5000)
        vp, wp, delta = post_collision_pairs(v, w, sigma, alpha)
        actual = (np.einsum("ij,ij->i", vp, vp) + np.einsum("ij,ij->i", wp, wp)
                  - np.einsum("ij,ij->i", v, v) - np.einsum("ij,ij->i", w, w))
        scale = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", w, w)
        assert np.all(np.abs(actual - delta) <= 1e-12 * np.maximum(scale, np.abs(delta)))
        assert np.all(delta <= 0.0)
        total += 5000


def test_energy_delta_zero_cases():
    rng = np.random.default_rng(3)
    v, w, sigma, _ = random_collisions(rng, 100)
    _, _, delta = post_collision_pairs(v, w, sigma, 1.0)
    assert np.all(delta == 0.0)
    u = v - w
    u_hat = u / np.linalg.norm(u, axis=1, keepdims=True)
    _, _, delta = post_collision_pairs(v, w, u_hat, 0.5)
    assert np.allclose(delta, 0.0, atol=1e-13 * np.max(np.sum(u * u, axis=1)))
    same = np.ones((4, 3))
    vp, wp, delta = post_collision_pairs(same, same, u_hat[:4], 0.3)
    assert np.all(delta == 0.0) and np.allclose(vp, same) and np.allclose(wp, same)


def test_degenerate_pair_unchanged():
    v, vs = post_collision([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0, 0, 1.0], 0.5)
    assert np.array_equal(v, [1.0, 2.0, 3.0]) and np.array_equal(vs, [1.0, 2.0, 3.0])


def test_sigma_validation():
    with pytest.raises(ContractViolationError):
        post_collision([1, 0, 0], [0, 1, 0], [0, 0, 1.001], 0.9)
    with pytest.raises(ContractViolationError):
        collision_energy_delta([1, 0, 0], [0, 1, 0], [0, 0, 2.0], 0.9)
    with pytest.raises(ContractViolationError):
        post_collision([1, 0, 0], [0, 1, 0], [0, 0, 1.0], 1.5)


def test_angular_moments_constant_3d():
    m = angular_moments(CrossSection.constant_3d(1.0))
    assert m.b0 == pytest.approx(4 * np.pi, rel=1e-14)
    assert m.b1 == pytest.approx(np.pi / 2, rel=1e-14)
    assert m.b2 == pytest.approx(4 * np.pi, rel=1e-14)
    m2 = angular_moments(CrossSection.constant_3d(2.0))
    assert m2.b0 == pytest.approx(2 * m.b0, rel=1e-14)
    assert m2.b1 == pytest.approx(2 * m.b1, rel=1e-14)
    assert m2.b2 == pytest.approx(2 * m.b2, rel=1e-14)


def test_angular_moments_tabulated_matches_constant():
    flat = CrossSection.tabulated([-1.0, 1.0], [1.0, 1.0], dimension=3)
    m = angular_moments(flat)
    assert m.b0 == pytest.approx(4 * np.pi, rel=1e-12)
    assert m.b1 == pytest.approx(np.pi / 2, rel=1e-12)


def test_angular_moments_homogeneous_in_b():
    x = np.linspace(-1, 1, 33)
    b = 1.0 + 0.5 * (x + 1.0) ** 2 / 4.0
    lam = 3.7
    m1 = angular_moments(CrossSection.tabulated(x, b, dimension=3))
    m2 = angular_moments(CrossSection.tabulated(x, lam * b, dimension=3))
    assert m2.b0 == pytest.approx(lam * m1.b0, rel=1e-12)
    assert m2.b1 == pytest.approx(lam * m1.b1, rel=1e-12)
    assert m2.b2 == pytest.approx(lam * m1.b2, rel=1e-12)


def test_angular_moments_2d_flat():
    # N = 2 weight is (1-x^2)^(-1/2): int dx = pi, so b0 = |S^0| pi = 2 pi
    flat = CrossSection.tabulated([-1.0, 1.0], [1.0, 1.0], dimension=2)
    m = angular_moments(flat)
    assert m.b0 == pytest.approx(2 * np.pi, rel=1e-12)
    assert m.b1 == pytest.approx(2 * np.pi / 8, rel=1e-12)


def test_cross_section_validation():
    with pytest.raises(ContractViolationError):
        CrossSection(dimension=2, b0prime=1.0)  # constant kernel is 3-D only
    with pytest.raises(ContractViolationError):
        CrossSection.tabulated([-1, 1], [1.0, 0.5])  # decreasing
    with pytest.raises(ContractViolationError):
        CrossSection.tabulated([-1, 1], [0.0, 1.0])  # not positive
    with pytest.raises(ContractViolationError):
        CrossSection.tabulated([-0.5, 1], [1.0, 1.0])  # bad support


def test_restitution_params():
    rp = RestitutionParams(alpha=0.9, rho=2.0)
    assert rp.tau_alpha == pytest.approx(2.0 * 0.1, abs=1e-15)
    with pytest.raises(ContractViolationError):
        RestitutionParams(alpha=1.2)


def test_sample_sigma_uniform_moments():
    rng = np.random.default_rng(5)
    cs = CrossSection.constant_3d(1.0)
    u_hat = np.tile(np.array([1.0, 0.0, 0.0]), (10**6, 1))
    s = sample_sigma_batch(u_hat, cs, rng)
    assert np.allclose(np.linalg.norm(s, axis=1), 1.0, atol=1e-12)
    c = s[:, 0]
    assert abs(np.mean(c)) < 3e-3
    assert abs(np.mean(c * c) - 1.0 / 3.0) < 3e-3


def sigma_chi2_pvalue(cs, rng, draws=10**6, nbins=40):
    u_hat = np.tile(np.eye(cs.dimension)[0], (draws, 1))
    s = sample_sigma_batch(u_hat, cs, rng)
    c = s @ np.eye(cs.dimension)[0]
    edges = np.linspace(-1.0, 1.0, nbins + 1)
    counts, _ = np.histogram(c, bins=edges)
    # expected mass per bin from b(x) (1-x^2)^((N-3)/2), Jacobi-weighted
    from scipy.integrate import quad
    expo = 0.5 * (cs.dimension - 3)

    def dens(x):
        return cs.evaluate(x) * (1.0 - x * x) ** expo if abs(x) < 1.0 else 0.0

    masses = np.array([quad(dens, a, b, limit=200)[0] for a, b in zip(edges, edges[1:])])
    probs = masses / masses.sum()
    expected = probs * draws
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return chi2.sf(stat, nbins - 1)


def test_sample_sigma_chi_squared_constant():
    p = sigma_chi2_pvalue(CrossSection.constant_3d(1.0), np.random.default_rng(17))
    assert p > 0.001


def test_sample_sigma_chi_squared_tabulated():
    x = np.linspace(-1, 1, 65)
    cs = CrossSection.tabulated(x, 0.5 + 0.75 * (x + 1.0), dimension=3)
    p = sigma_chi2_pvalue(cs, np.random.default_rng(23))
    assert p > 0.001


def test_sample_sigma_single():
    rng = np.random.default_rng(2)
    s = sample_sigma(np.array([0.0, 0.0, 1.0]), CrossSection.constant_3d(), rng)
    assert s.shape == (3,)
    assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ContractViolationError):
        sample_sigma(np.array([0.0, 0.0, 2.0]), CrossSection.constant_3d(), rng)


def test_angular_moments_positive_contract():
    with pytest.raises(ContractViolationError):
        AngularMoments(b0=0.0, b1=1.0, b2=1.0)


def test_sphere_area_values():
    assert sphere_area(0) == pytest.approx(2.0)
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert sphere_area(2) == pytest.approx(4 * np.pi)
