import math

import numpy as np
import pytest
from scipy import integrate

from clwelab import distributions as dist
from clwelab.distributions import ClweParams, HiddenDirection, HiddenSubspace, SampleBatch
from clwelab.harness.rng import make_rng
from clwelab.harness.stats import chi_square_counts, chi_square_uniform, ks_two_sample, variance_z
from clwelab.numerics import ParameterError, discrete_gaussian_second_moment
from clwelab.reductions import random_rotation

INV_2PI = 1 / (2 * math.pi)
RHO_Z = 1.0864348112133080146


def test_params_validation_and_regime():
    with pytest.raises(ParameterError):
        ClweParams(2, -0.1, 1.0)
    with pytest.raises(ParameterError):
        ClweParams(2, 0.1, 0.0)
    p = ClweParams(4, 0.1, 4.0)
    assert p.hardness_regime()
    assert p.hardness_regime(poly_bound=100)
    assert not p.hardness_regime(poly_bound=10)
    assert not ClweParams(16, 0.1, 1.5).hardness_regime()
    assert p.layer_spacing == pytest.approx(4 / (0.01 + 16))


def test_hidden_direction_normalised():
    w = HiddenDirection([3, 4])
    assert w.w.tolist() == pytest.approx([0.6, 0.8])
    assert float(sum(x * x for x in w.precise(256))) == pytest.approx(1, abs=1e-70)
    with pytest.raises(ParameterError):
        HiddenDirection([0, 0])


def test_hidden_subspace_orthonormal():
    W = HiddenSubspace.random(6, 3, make_rng(0, "W"))
    assert np.allclose(W.W.T @ W.W, np.eye(3))
    with pytest.raises(ParameterError):
        HiddenSubspace(np.ones((3, 2)))


def test_batch_is_immutable():
    b = SampleBatch(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        b.y[0, 0] = 1.0
    with pytest.raises(ParameterError):
        SampleBatch(np.zeros((3, 2)), np.zeros(2))


def test_clwe_noiseless_exact_relation():
    w = HiddenDirection([3, 4])
    b = dist.sample_clwe(ClweParams(2, 0.0, 4.0), w, make_rng(1, "nl"), 50, fidelity="precise", prec=256)
    wp = w.precise(256)
    for y, z in zip(b.y, b.z):
        v = 4 * (y[0] * wp[0] + y[1] * wp[1]) - z
        assert abs(v - round(float(v))) < 1e-70
        assert 0 <= z < 1


def test_clwe_marginal_variance(rng):
    b = dist.sample_clwe(ClweParams(3, 0.1, 2.0), HiddenDirection.random(3, rng), rng, 100_000)
    for i in range(3):
        assert abs(variance_z(b.y[:, i], INV_2PI)) < 4


def test_clwe_z_uniform_at_large_gamma(rng):
    b = dist.sample_clwe(ClweParams(2, 0.0, 3.0), HiddenDirection([1, 0]), rng, 100_000)
    assert chi_square_uniform(b.z, 64).passed


def test_hclwe_layer_spacing(rng):
    p = ClweParams(2, 0.05, 3.0)
    w = HiddenDirection([1, 1])
    t = dist.sample_hclwe(p, w, rng, 20_000).projection(w.w)
    layers = np.rint(t / p.layer_spacing)
    resid = t - layers * p.layer_spacing
    assert np.max(np.abs(resid)) < 8 * p.component_width / math.sqrt(2 * math.pi)


def test_hclwe_orthogonal_normality(rng):
    w = HiddenDirection([1, 0, 0])
    b = dist.sample_hclwe(ClweParams(3, 0.1, 2.0), w, rng, 100_000)
    for i in (1, 2):
        assert abs(variance_z(b.y[:, i], INV_2PI)) < 4


def test_hclwe_normaliser_monte_carlo(rng):
    # Z = E_{t ~ D_R}[sum_k rho_beta(gamma t - k)]; the theta-oracle value must match.
    beta, gamma = 0.2, 1.5
    t = rng.standard_normal(200_000) * math.sqrt(INV_2PI)
    ks = np.arange(-10, 11)
    vals = np.exp(-math.pi * (gamma * t[:, None] - ks) ** 2 / beta**2).sum(1)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - dist.hclwe_normalizer(beta, gamma)) < 3 * se
    a = dist.density_ratio(t, beta, gamma)
    assert abs(a.mean() - 1) < 3 * a.std() / math.sqrt(a.size)


def test_noiseless_support_and_moment():
    rng = make_rng(7, "noiseless")
    gamma = 2.0
    w = HiddenDirection([1, 2, 2])
    t = dist.sample_hclwe_noiseless(gamma, w, rng, 1_000_000).projection(w.w)
    assert np.allclose(t * gamma, np.rint(t * gamma), atol=1e-9)
    m2 = float(discrete_gaussian_second_moment(gamma))
    sd = (t**2).std() / math.sqrt(t.size)
    assert abs((t**2).mean() - m2) < 4 * sd


def test_noiseless_gamma_one_zero_mass():
    rng = make_rng(8, "noiseless-1")
    t = dist.sample_hclwe_noiseless(1.0, HiddenDirection([1]), rng, 100_000).y[:, 0]
    p = 1 / RHO_Z
    hits = int(np.sum(np.abs(t) < 1e-12))
    assert abs(hits - t.size * p) <= 3 * math.sqrt(t.size * p * (1 - p))


def test_m_zero_is_gaussian():
    p = ClweParams(4, 0.1, 2.0)
    a = dist.sample_hclwe_m(p, HiddenSubspace.random(4, 0, make_rng(0, "w")), make_rng(1, "s"), 100)
    b = dist.sample_null_gaussian(4, make_rng(1, "s"), 100)
    assert np.array_equal(a.y, b.y)


def test_m_one_matches_hclwe(rng):
    p = ClweParams(3, 0.1, 2.0)
    W = HiddenSubspace.random(3, 1, rng)
    w = HiddenDirection(W.W[:, 0])
    a = dist.sample_hclwe_m(p, W, rng, 50_000).projection(w.w)
    b = dist.sample_hclwe(p, w, rng, 50_000).projection(w.w)
    assert ks_two_sample(a, b).passed


def test_m_two_cross_covariance(rng):
    p = ClweParams(5, 0.1, 1.5)
    W = HiddenSubspace.random(5, 2, rng)
    b = dist.sample_hclwe_m(p, W, rng, 100_000)
    h = b.y @ W.W
    prod = h[:, 0] * h[:, 1]
    assert abs(prod.mean()) < 4 * prod.std() / math.sqrt(prod.size)
    for j in range(2):
        resid = h[:, j] - p.layer_spacing * np.rint(h[:, j] / p.layer_spacing)
        assert np.std(resid) < 0.5 * np.std(h[:, j])


def test_density_integrates_to_one():
    for beta, gamma in [(0.1, 2.0), (0.3, 1.0), (0.05, 3.0)]:
        spacing = gamma / (beta**2 + gamma**2)
        edges = np.arange(-6, 6 + spacing / 2, spacing / 4)
        total = sum(
            integrate.quad(lambda t: float(dist.hclwe_marginal_pdf(t, beta, gamma)), a, b, epsabs=1e-14, epsrel=1e-12)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )
        assert abs(total - 1) < 1e-6


def test_density_symmetric_and_ratio(rng):
    p = ClweParams(3, 0.1, 2.0)
    w = HiddenDirection.random(3, rng)
    y = rng.standard_normal((50, 3)) * 0.4
    h = dist.hclwe_density(y, p, w)
    assert np.allclose(h, dist.hclwe_density(-y, p, w), rtol=1e-13)
    ratio = h / dist.gaussian_density(y)
    assert np.allclose(ratio, dist.density_ratio(y @ w.w, 0.1, 2.0), rtol=1e-12)
    assert np.allclose(h, dist.hclwe_density(y, p, w, k_trunc=10), rtol=1e-12)


def test_density_insufficient_truncation():
    p = ClweParams(1, 0.1, 2.0)
    with pytest.raises(ParameterError):
        dist.hclwe_density([[1.5]], p, HiddenDirection([1]), k_trunc=1)


def test_null_clwe_uniform_and_isotropic(rng):
    b = dist.sample_null_clwe(4, rng, 100_000)
    assert chi_square_uniform(b.z, 64).passed
    for i in range(4):
        for j in range(i + 1, 4):
            prod = b.y[:, i] * b.y[:, j]
            assert abs(prod.mean()) < 4 * prod.std() / math.sqrt(prod.size)


def test_truncate_zero_and_weights():
    p = ClweParams(2, 0.1, 2.0)
    m0 = dist.truncate_hclwe(p, 0)
    assert m0.weights.tolist() == [1.0] and m0.means.tolist() == [0.0]
    m3 = dist.truncate_hclwe(p, 3)
    j = np.arange(-3, 4)
    w = np.exp(-math.pi * j**2 / (0.01 + 4))
    assert np.allclose(m3.weights, w / w.sum())
    assert m3.tv_bound == pytest.approx(2 * math.exp(-9 * math.pi / 4.01))
    with pytest.raises(ParameterError):
        dist.truncate_hclwe(p, -1)


def test_rotation_equivariance():
    p = ClweParams(3, 0.1, 2.0)
    w = HiddenDirection([1, 0, 0])
    R = random_rotation(3, make_rng(0, "R"))
    a = dist.sample_hclwe(p, HiddenDirection(R @ w.w), make_rng(1, "a"), 50_000)
    b = dist.sample_hclwe(p, w, make_rng(2, "b"), 50_000).y @ R.T
    v = R @ w.w
    assert ks_two_sample(a.y @ v, b @ v).passed
    u = R[:, 1]
    assert ks_two_sample(a.y @ u, b @ u).passed


def test_sampler_matches_density_binned(rng):
    beta, gamma = 0.2, 1.5
    w = HiddenDirection([1, 0])
    t = dist.sample_hclwe(ClweParams(2, beta, gamma), w, rng, 100_000).y[:, 0]
    edges = np.linspace(-1.5, 1.5, 121)
    counts, _ = np.histogram(t, edges)
    probs = [integrate.quad(lambda s: float(dist.hclwe_marginal_pdf(s, beta, gamma)), a, b)[0] for a, b in zip(edges[:-1], edges[1:])]
    probs.append(1 - sum(probs))
    counts = np.append(counts, t.size - counts.sum())
    assert chi_square_counts(counts, probs).passed


def test_noiseless_limit(rng):
    gamma = 2.0
    w = HiddenDirection([1])
    a = dist.sample_hclwe(ClweParams(1, 1e-6, gamma), w, rng, 100_000).y[:, 0]
    b = dist.sample_hclwe_noiseless(gamma, w, rng, 100_000).y[:, 0]
    ks = np.arange(-30, 31)
    pmf = np.exp(-math.pi * ks**2 / gamma**2)
    for t in (a, b):
        # Coarse bins of width 1/(4 gamma) centred on the layers.
        j = np.rint(t * gamma)
        assert np.all(np.abs(t - j / gamma) < 1 / (8 * gamma))
        counts = np.array([np.sum(j == k) for k in ks])
        assert counts.sum() == t.size
        assert chi_square_counts(counts, pmf).passed
