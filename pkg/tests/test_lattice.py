import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clwelab.harness.experiments import random_basis
from clwelab.harness.rng import make_rng
from clwelab.harness.stats import chi_square_counts
from clwelab.lattice import (
    DiscreteGaussianSpec,
    Lattice,
    RankDeficientError,
    WidthTooSmallError,
    babai_nearest_plane,
    closest_vector_bruteforce,
    exact_pmf,
    integer_det,
    lll_reduce,
    sample_discrete_gaussian,
    sample_dz,
    shortest_vector_bruteforce,
    smoothing_bounds,
    smoothing_parameter,
    successive_minima,
    vector_norm,
)
from clwelab.numerics import ParameterError

RHO_Z = 1.0864348112133080146

int_matrices = st.integers(2, 4).flatmap(
    lambda n: st.lists(st.lists(st.integers(-20, 20), min_size=n, max_size=n), min_size=n, max_size=n)
)


def test_dual_examples():
    assert Lattice(np.eye(3)).dual() == Lattice(np.eye(3))
    gamma = 4
    d = Lattice([[Fraction(1, gamma)]]).dual()
    assert float(d.basis[0, 0]) == pytest.approx(gamma)


def test_singular_basis_rejected():
    with pytest.raises(RankDeficientError):
        Lattice([[1, 2], [2, 4]])
    with pytest.raises(ParameterError):
        Lattice([[1, 2, 3], [4, 5, 6]])


def test_lll_identity_unchanged():
    red, T = lll_reduce(np.eye(3))
    assert [[float(red[i, j]) for j in range(3)] for i in range(3)] == np.eye(3).tolist()
    assert T == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


@settings(max_examples=40, deadline=None)
@given(int_matrices)
def test_lll_unimodular_and_equivalent(rows):
    if integer_det(rows) == 0:
        return
    n = len(rows)
    red, T = lll_reduce(rows)
    assert abs(integer_det(T)) == 1
    # reduced = basis @ T exactly (integer input).
    for i in range(n):
        for j in range(n):
            assert int(red[i, j]) == sum(rows[i][k] * T[k][j] for k in range(n))
    # Size-reduced and Lovasz condition hold on the output.
    L = Lattice(red)
    for j in range(n):
        for i in range(j):
            assert abs(L.gs_mu[j][i]) <= 0.5 + 1e-12
    for k in range(1, n):
        lhs = L.gs_norms_sq[k] + L.gs_mu[k][k - 1] ** 2 * L.gs_norms_sq[k - 1]
        assert lhs >= 0.75 * L.gs_norms_sq[k - 1] * (1 - 1e-12)


@settings(max_examples=40, deadline=None)
@given(int_matrices)
def test_lll_first_vector_within_approximation_factor(rows):
    if integer_det(rows) == 0:
        return
    n = len(rows)
    L = Lattice(rows)
    b1 = vector_norm(L.reduced().vectors()[0])
    lam1 = vector_norm(shortest_vector_bruteforce(L))
    assert b1 <= 2 ** ((n - 1) / 2) * lam1 * (1 + 1e-12)


def test_integer_det():
    assert integer_det([[2, 1], [1, 1]]) == 1
    assert integer_det([[1, 2, 3], [4, 5, 6], [7, 8, 10]]) == -3


def test_babai_examples():
    L = Lattice(np.eye(2))
    v, off = babai_nearest_plane(L, [0.3, -0.4])
    assert [float(x) for x in v] == [0.0, 0.0]
    v, off = babai_nearest_plane(Lattice([[2, 1], [0, 3]]), [3, 3])
    assert all(float(x) == 0 for x in off)


def test_babai_within_radius_matches_bruteforce():
    rng = make_rng(5, "babai")
    for _ in range(30):
        L = Lattice(random_basis(2, rng))
        red = L.reduced()
        radius = 0.5 * min(math.sqrt(float(g)) for g in red.gs_norms_sq)
        coeffs = rng.integers(-5, 6, 2)
        point = L.basis_float @ coeffs
        direction = rng.standard_normal(2)
        offset = 0.99 * radius * rng.random() * direction / np.linalg.norm(direction)
        target = point + offset
        v, _ = babai_nearest_plane(L, target)
        assert np.allclose([float(x) for x in v], point, atol=1e-9)
        cv = closest_vector_bruteforce(L, target)
        assert np.allclose([float(x) for x in cv], point, atol=1e-9)


def test_shortest_vector_examples():
    assert float(vector_norm(shortest_vector_bruteforce(Lattice(np.eye(3))))) == pytest.approx(1)
    assert float(vector_norm(shortest_vector_bruteforce(Lattice([[Fraction(1, 2)]])))) == pytest.approx(0.5)


def test_successive_minima_diagonal():
    mins = successive_minima(Lattice([[1, 0, 0], [0, 2, 0], [0, 0, 3]]))
    assert [float(m) for m in mins] == pytest.approx([1, 2, 3])


def test_smoothing_integers():
    eps = math.exp(-math.pi)
    b = smoothing_bounds(Lattice([[1]]), eps)
    assert float(b.lower) == pytest.approx(1.0, abs=1e-12)
    # Direct theta check: rho_1(Z \ 0) = RHO_Z - 1 exceeds epsilon, so eta > 1.
    assert RHO_Z - 1 > eps
    eta = smoothing_parameter(Lattice([[1]]), eps)
    assert eta > 1
    assert float(b.lower) <= eta <= float(b.upper) * (1 + 1e-9)
    assert b.dual_verified and b.primal_verified


def test_smoothing_scaling():
    eps = 0.01
    base = smoothing_bounds(Lattice([[1, 0.3], [0, 1.2]]), eps)
    scaled = smoothing_bounds(Lattice([[3, 0.9], [0, 3.6]]), eps)
    for name in ("lower", "upper_dual", "upper_primal"):
        assert float(getattr(scaled, name)) == pytest.approx(3 * float(getattr(base, name)), rel=1e-9)


def test_smoothing_lower_below_upper_random():
    rng = make_rng(9, "smoothing")
    for _ in range(100):
        b = smoothing_bounds(Lattice(random_basis(2, rng)), 0.01)
        assert b.lower <= b.upper_primal
        assert b.lower <= b.upper_dual
        assert b.primal_verified


def test_smoothing_epsilon_range():
    with pytest.raises(ParameterError):
        smoothing_bounds(Lattice([[1]]), 1.5)


def test_json_round_trip():
    L = Lattice([[Fraction(1, 3), 2], [0, Fraction(7, 5)]])
    assert Lattice.from_json(L.to_json()) == L


def test_exact_sampler_zero_probability():
    rng = make_rng(1, "dgs-z")
    spec = DiscreteGaussianSpec(Lattice([[1]]), 1.0)
    N = 100_000
    x = sample_discrete_gaussian(spec, rng, N)
    p = 1 / RHO_Z
    hits = int(np.sum(x[:, 0] == 0))
    assert abs(hits - N * p) <= 3 * math.sqrt(N * p * (1 - p))


def test_coset_half_symmetric():
    rng = make_rng(2, "dgs-coset")
    spec = DiscreteGaussianSpec(Lattice([[1]]), 1.0, coset_shift=(0.5,))
    x = sample_discrete_gaussian(spec, rng, 100_000)[:, 0]
    assert np.all(np.isclose(np.mod(x, 1), 0.5))
    plus, minus = int(np.sum(x == 0.5)), int(np.sum(x == -0.5))
    n = plus + minus
    assert abs(plus - n / 2) <= 3 * math.sqrt(n) / 2
    points, pmf, _ = exact_pmf(spec)
    order = np.argsort(points[:, 0])
    assert np.allclose(pmf[order], pmf[order][::-1])


def test_exact_mode_chi_square_2d():
    rng = make_rng(3, "dgs-2d")
    spec = DiscreteGaussianSpec(Lattice([[1, 0.4], [0, 0.9]]), 1.3)
    points, pmf, excluded = exact_pmf(spec)
    assert excluded < 1e-12
    x = sample_discrete_gaussian(spec, rng, 100_000)
    index = {tuple(np.round(p, 9)): i for i, p in enumerate(points)}
    counts = np.zeros(len(points))
    for row in np.round(x, 9):
        counts[index[tuple(row)]] += 1
    assert chi_square_counts(counts, pmf).passed


def test_nearest_plane_mode_moments():
    rng = make_rng(4, "dgs-np")
    L = Lattice([[1, 0.2], [0, 1]])
    spec = DiscreteGaussianSpec(L, 6.0, mode="nearest-plane")
    x = sample_discrete_gaussian(spec, rng, 50_000)
    assert np.all([L.contains(v) for v in x[:200]])
    var = x.var(axis=0)
    # Well above smoothing, the discrete Gaussian has covariance close to width^2/(2 pi).
    assert np.allclose(var, 36 / (2 * math.pi), rtol=0.03)


def test_nearest_plane_rejects_small_width():
    spec = DiscreteGaussianSpec(Lattice(np.eye(2)), 0.5, mode="nearest-plane")
    with pytest.raises(WidthTooSmallError):
        sample_discrete_gaussian(spec, make_rng(0, "x"))


def test_sample_dz_matches_pmf():
    rng = make_rng(6, "dz")
    x = sample_dz(2.0, np.full(100_000, 0.3), rng)
    ks = np.arange(-20, 21)
    p = np.exp(-math.pi * (ks - 0.3) ** 2 / 4)
    counts = np.array([np.sum(x == k) for k in ks])
    assert counts.sum() == x.size
    assert chi_square_counts(counts, p).passed
