import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clwelab.lattice import Lattice
from clwelab.numerics import (
    InternalConsistencyError,
    ParameterError,
    complete_squares,
    context,
    discrete_gaussian_second_moment,
    gaussian_mass,
    gaussian_tv_bound,
    poisson_residual,
    rho,
    rho_np,
    width_to_std,
)

# Frozen from direct mpmath summation (|k| <= 10) at 40 digits.
RHO_Z = 1.0864348112133080146
RHO_2Z = 1.0000069746847124180


def test_width_to_std():
    assert width_to_std(1.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert width_to_std(math.sqrt(2 * math.pi)) == pytest.approx(1.0)


def test_rho_examples():
    assert rho([0, 0, 0]) == 1
    assert float(rho([1])) == pytest.approx(math.exp(-math.pi), rel=1e-15)
    assert float(rho([1, 1], math.sqrt(2))) == pytest.approx(math.exp(-math.pi), rel=1e-15)
    assert rho_np(np.zeros((3, 2)), 1.0).tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ParameterError):
        rho([1], 0)


def test_gaussian_mass_integers():
    res = gaussian_mass(Lattice([[1]]), 1, 1e-12)
    assert abs(float(res.mass) - RHO_Z) < 1e-12
    assert res.tail_bound < 1e-12


def test_gaussian_mass_even_integers():
    assert abs(float(gaussian_mass(Lattice([[2]]), 1, 1e-12).mass) - RHO_2Z) < 1e-12


def test_gaussian_mass_product_structure():
    m2 = gaussian_mass(Lattice(np.eye(2)), 1, 1e-14).mass
    assert abs(float(m2) - RHO_Z**2) < 1e-12


def test_gaussian_mass_matches_direct_sum_oracle():
    # Skewed 2-D basis against a brute-force coefficient box.
    B = [[1.0, 0.3], [0.2, 0.9]]
    direct = mpmath.fsum(
        mpmath.exp(-mpmath.pi * ((B[0][0] * a + B[0][1] * b) ** 2 + (B[1][0] * a + B[1][1] * b) ** 2) / 1.5**2)
        for a in range(-15, 16)
        for b in range(-15, 16)
    )
    assert abs(float(gaussian_mass(Lattice(B), 1.5, 1e-13).mass) - float(direct)) < 1e-12


@pytest.mark.parametrize("basis", [np.eye(1), np.eye(3), [[0.5]]])
def test_poisson_residual_small(basis):
    assert abs(float(poisson_residual(Lattice(basis), 1, 1e-12))) <= 2e-12


def test_complete_squares_symmetric():
    r0, r3, c3 = complete_squares(1, 1, [0, 0], [0, 0])
    assert float(r0) == pytest.approx(math.sqrt(2))
    assert float(r3) == pytest.approx(1 / math.sqrt(2))
    assert [float(c) for c in c3] == [0.0, 0.0]


def test_complete_squares_example_and_identity(rng):
    r0, r3, c3 = complete_squares(3, 4, [1], [0])
    assert float(r0) == pytest.approx(5)
    assert float(r3) == pytest.approx(12 / 5)
    assert float(c3[0]) == pytest.approx(0.64)
    # rho_r1(x - c1) rho_r2(x - c2) = rho_r0(c1 - c2) rho_r3(x - c3) at random x.
    ctx = context()
    for x in map(ctx.mpf, rng.uniform(-5, 5, 100)):
        lhs = rho([x - 1], 3) * rho([x], 4)
        rhs = rho([1], r0) * rho([x - c3[0]], r3)
        assert float(abs(lhs - rhs)) < 1e-30


def test_gaussian_tv_bound_examples():
    assert gaussian_tv_bound(0, 1, 0, 1) == 0
    assert gaussian_tv_bound(0, 1, 1, 1) == pytest.approx(0.5)
    assert gaussian_tv_bound(0, 1, 0, 2) == pytest.approx(9 / 8)


def test_gaussian_tv_bound_dominates_actual_tv():
    # Closed form for centred normals with sd 1 and 2: crossing at x^2 = 8 ln 2 / 3.
    x = math.sqrt(8 * math.log(2) / 3)
    Phi = lambda u: 0.5 * (1 + math.erf(u / math.sqrt(2)))  # noqa: E731
    tv = 2 * (Phi(x) - Phi(x / 2))
    quad = mpmath.quad(lambda t: abs(mpmath.npdf(t, 0, 1) - mpmath.npdf(t, 0, 2)) / 2, [-mpmath.inf, -x, 0, x, mpmath.inf])
    assert tv == pytest.approx(float(quad), abs=1e-10)
    assert tv == pytest.approx(0.3226755, abs=1e-6)
    assert gaussian_tv_bound(0, 1, 0, 2) >= tv


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-3, 3), st.floats(0.1, 3), st.floats(-3, 3), st.floats(0.1, 3),
)
def test_gaussian_tv_bound_upper_bounds_quadrature(m1, s1, m2, s2):
    f = lambda t: abs(mpmath.npdf(t, m1, s1) - mpmath.npdf(t, m2, s2)) / 2  # noqa: E731
    pts = sorted({m1 - 10 * s1, m1, m2, m1 + 10 * s1, m2 - 10 * s2, m2 + 10 * s2})
    tv = float(mpmath.quad(f, [-mpmath.inf] + pts + [mpmath.inf]))
    assert gaussian_tv_bound(m1, s1, m2, s2) >= tv - 1e-9


def test_second_moment_gamma_one():
    # Oracle: sum k^2 exp(-pi k^2) / sum exp(-pi k^2), |k| <= 12, at 40 digits.
    val = discrete_gaussian_second_moment(1, 1e-12)
    assert abs(float(val) - 0.079577471545947667884) < 1e-12


@pytest.mark.parametrize("gamma,oracle", [(1.5, 0.15532998397352236162), (2.0, 0.15912704454762921399)])
def test_second_moment_direct_oracle(gamma, oracle):
    assert abs(float(discrete_gaussian_second_moment(gamma, 1e-12)) - oracle) < 1e-12


def test_second_moment_large_gamma_limit():
    ctx = context(256)
    val = discrete_gaussian_second_moment(8, 1e-30, prec=256)
    assert abs(val - 1 / (2 * ctx.pi)) < math.exp(-50)


def test_second_moment_errors():
    with pytest.raises(ParameterError):
        discrete_gaussian_second_moment(0.5)
    assert issubclass(InternalConsistencyError, ArithmeticError)
