"""Arbitrary-precision Gaussian helpers and lattice Gaussian mass (theta series).

Real quantities live in private mpmath contexts, one per precision, so nothing
here touches ``mpmath.mp``.  Widths follow the ``rho_s`` convention: a Gaussian
of width ``s`` has covariance ``s**2 / (2*pi)``.  :func:`width_to_std` is the
only place that converts a width into a standard deviation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from mpmath.ctx_mp import MPContext

DEFAULT_PREC = 256
DEFAULT_TOL = 1e-12
MIN_PREC = 64
MAX_ENUMERATION_POINTS = 20_000_000


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


class PrecisionError(ArithmeticError):
    """The requested tolerance cannot be certified at the working precision."""


class InternalConsistencyError(ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


@functools.lru_cache(maxsize=None)
def context(prec: int = DEFAULT_PREC) -> MPContext:
    """Shared mpmath context at ``prec`` bits.  Treat it as read-only."""
    prec = int(prec)
    if prec < MIN_PREC:
        raise ParameterError(f"precision must be >= {MIN_PREC} bits, got {prec}")
    ctx = MPContext()
    ctx.prec = prec
    return ctx


def solver_precision(n: int) -> int:
    return max(DEFAULT_PREC, 8 * n * n)


def width_to_std(s):
    """Standard deviation of the Gaussian with width ``s``."""
    return s / math.sqrt(2 * math.pi)


def rho(x: Sequence, s=1, prec: int = DEFAULT_PREC):
    """``exp(-pi * ||x/s||^2)`` at ``prec`` bits."""
    ctx = context(prec)
    s = ctx.mpf(s)
    if s <= 0:
        raise ParameterError("width s must be positive")
    sq = ctx.fsum(ctx.mpf(xi) ** 2 for xi in np.ravel(np.asarray(x, dtype=object)))
    return ctx.exp(-ctx.pi * sq / s**2)


def rho_np(x, s=1.0):
    """Vectorised float ``rho_s`` over the last axis of ``x`` (scalars allowed)."""
    x = np.asarray(x, dtype=float)
    sq = x * x if x.ndim == 0 else np.sum(x * x, axis=-1)
    return np.exp(-np.pi * sq / (s * s))


def theta_z_upper(s: float) -> float:
    """An upper bound on ``rho_s(Z + c)`` valid for every shift ``c``."""
    if s <= 0:
        raise ParameterError("width must be positive")
    a = math.exp(-math.pi / (s * s))
    b = 1.0 - math.exp(-3 * math.pi / (s * s))
    bound = 1.0 + s
    if b > 0:
        bound = min(bound, 1.0 + 2.0 * a / b)
    return bound


def z_tail(s: float, k: float) -> float:
    """Bound on the mass of ``rho_s`` over points of ``Z + c`` farther than ``k`` from 0.

    Neighbouring excluded points are at least ``k, k+1, ...`` away on each
    side, so each side is dominated by a geometric series with ratio
    ``exp(-pi (2k+1) / s^2)``.
    """
    q = math.exp(-math.pi * (2 * k + 1) / (s * s))
    return 2.0 * math.exp(-math.pi * k * k / (s * s)) / (1.0 - q)


def _halfwidth(s: float, target: float) -> float:
    """Smallest (roughly) box halfwidth ``k`` with ``z_tail(s, k) <= target``."""
    k = s * math.sqrt(max(math.log(4.0 / target), 1.0) / math.pi)
    while z_tail(s, k) > target:
        k *= 1.05
    return k


@dataclass(frozen=True)
class GaussianMassResult:
    mass: object  # mpf
    truncation_radius: float
    tail_bound: float
    points: int = 0

    def __float__(self) -> float:
        return float(self.mass)


def enumeration_plan(gs_norms: Sequence[float], s: float, tol: float):
    """Per-level box halfwidths (coefficient units) and the certified tail bound.

    Points excluded by the box are partitioned by the outermost level at which
    they leave it; each block is bounded by that level's 1-D tail times the
    shift-uniform theta bound of every other level.
    """
    widths = [s / g for g in gs_norms]
    uppers = [theta_z_upper(w) for w in widths]
    n = len(widths)
    halfwidths = []
    tail = 0.0
    for j, w in enumerate(widths):
        others = math.prod(uppers[:j] + uppers[j + 1:])
        k = _halfwidth(w, tol / (2 * n * others))
        halfwidths.append(k)
        tail += z_tail(w, k) * others
    return halfwidths, tail


def _box_sum(ctx, norms_sq_over_s2, mu, halfwidths, centre=None):
    """Sum of ``exp(-pi * sum_j (x_j + shift_j)^2 * g_j)`` over the GS box.

    ``mu[i][j]`` (i > j) are Gram-Schmidt coefficients; ``centre`` gives the
    GS-frame offset of a coset (zero for the lattice itself).
    """
    n = len(norms_sq_over_s2)
    pi = ctx.pi
    count = 0

    def level(j, shifts):
        nonlocal count
        c = shifts[j]
        lo = math.ceil(float(-c) - halfwidths[j])
        hi = math.floor(float(-c) + halfwidths[j])
        total = ctx.zero
        for x in range(lo, hi + 1):
            t = x + c
            term = ctx.exp(-pi * t * t * norms_sq_over_s2[j])
            if j == 0:
                count += 1
                total += term
            else:
                inner = list(shifts)
                for i in range(j):
                    inner[i] = shifts[i] + mu[j][i] * x
                total += term * level(j - 1, inner)
        return total

    start = [ctx.zero] * n if centre is None else [ctx.mpf(c) for c in centre]
    return level(n - 1, start), count


def gaussian_mass(lattice, s=1, tol: float = DEFAULT_TOL) -> GaussianMassResult:
    """``rho_s(L)`` by box enumeration in the Gram-Schmidt frame of a reduced basis."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    ctx = context(lattice.prec)
    s = ctx.mpf(s)
    if s <= 0:
        raise ParameterError("width s must be positive")
    red = lattice.reduced()
    gs_norms = [float(ctx.sqrt(v)) for v in red.gs_norms_sq]
    halfwidths, tail = enumeration_plan(gs_norms, float(s), tol)
    npts = math.prod(2 * k + 1 for k in halfwidths)
    if npts > MAX_ENUMERATION_POINTS:
        raise ParameterError(f"enumeration box too large ({npts:.3g} points)")
    scaled = [v / s**2 for v in red.gs_norms_sq]
    mass, count = _box_sum(ctx, scaled, red.gs_mu, halfwidths)
    if tol < float(mass) * 2.0 ** (-lattice.prec + 16) * max(count, 1):
        raise PrecisionError(f"tol={tol:g} is below the rounding floor at {lattice.prec} bits")
    radius = min(k * g for k, g in zip(halfwidths, gs_norms))
    return GaussianMassResult(mass=mass, truncation_radius=radius, tail_bound=tail, points=count)


def poisson_residual(lattice, s=1, tol: float = DEFAULT_TOL):
    """``|rho_s(L) - det(L*) s^n rho_{1/s}(L*)|``, which should be at most ``2*tol``."""
    ctx = context(lattice.prec)
    s = ctx.mpf(s)
    primal = gaussian_mass(lattice, s, tol).mass
    dual = lattice.dual()
    factor = dual.det * s**lattice.n
    dual_mass = gaussian_mass(dual, 1 / s, tol / float(factor)).mass
    return abs(primal - factor * dual_mass)


def complete_squares(r1, r2, c1: Sequence, c2: Sequence, prec: int = DEFAULT_PREC):
    """Combine ``rho_r1(x-c1) * rho_r2(x-c2)`` into ``rho_r0(c1-c2) * rho_r3(x-c3)``.

    Returns ``(r0, r3, c3)``.
    """
    ctx = context(prec)
    r1, r2 = ctx.mpf(r1), ctx.mpf(r2)
    if r1 <= 0 or r2 <= 0:
        raise ParameterError("widths must be positive")
    if len(c1) != len(c2):
        raise ParameterError("centres must have the same dimension")
    r0 = ctx.sqrt(r1**2 + r2**2)
    r3 = r1 * r2 / r0
    a, b = (r3 / r1) ** 2, (r3 / r2) ** 2
    c3 = [a * ctx.mpf(u) + b * ctx.mpf(v) for u, v in zip(c1, c2)]
    return r0, r3, c3


def gaussian_tv_bound(mu1, sigma1, mu2, sigma2):
    """Upper bound on TV between N(mu1, sigma1^2) and N(mu2, sigma2^2).

    Here ``sigma`` is a standard deviation, not a width.  The bound can exceed 1.
    """
    if sigma1 <= 0 or sigma2 <= 0:
        raise ParameterError("standard deviations must be positive")
    var_term = 3 * abs(sigma1**2 - sigma2**2) / (2 * max(sigma1**2, sigma2**2))
    mean_term = abs(mu1 - mu2) / (2 * max(sigma1, sigma2))
    return var_term + mean_term


def _scaled_z_series(ctx, spacing, weight, tol, decay):
    """``sum_k weight(k*spacing) * exp(-pi (k*spacing)^2)`` over Z, truncated with certificate.

    ``decay`` bounds ``|weight(x)|`` by ``decay * (1 + x^2)``.
    """
    # (1 + x^2) exp(-pi x^2 / 2) <= 1 for all x, so the weighted tail is below
    # decay * z_tail(sqrt(2)/spacing, K).
    width = math.sqrt(2.0) / float(spacing)
    k = _halfwidth(width, tol / (2.0 * max(float(decay), 1.0)))
    kmax = math.ceil(k)
    total = ctx.zero
    for i in range(-kmax, kmax + 1):
        x = i * spacing
        total += weight(x) * ctx.exp(-ctx.pi * x * x)
    return total


def discrete_gaussian_second_moment(gamma, tol: float = DEFAULT_TOL, prec: int = DEFAULT_PREC):
    """``E[x^2]`` for ``x ~ D_{(1/gamma)Z}``, summed on both sides of Poisson summation.

    The direct series over ``(1/gamma)Z`` and the dual series over ``gamma*Z``
    (with ``g_hat(y) = (1/(2 pi) - y^2) rho(y)``) must agree within ``4*tol``;
    the dual value is returned.
    """
    ctx = context(prec)
    gamma = ctx.mpf(gamma)
    if gamma < 1:
        raise ParameterError("gamma must be >= 1")
    one = lambda x: ctx.one  # noqa: E731
    h = tol / 8
    primal_num = _scaled_z_series(ctx, 1 / gamma, lambda x: x * x, h, 1.0)
    primal_den = _scaled_z_series(ctx, 1 / gamma, one, h, 1.0)
    dual_num = _scaled_z_series(ctx, gamma, lambda y: 1 / (2 * ctx.pi) - y * y, h, 1.0)
    dual_den = _scaled_z_series(ctx, gamma, one, h, 1.0)
    primal = primal_num / primal_den
    dual = dual_num / dual_den
    if abs(primal - dual) > 4 * tol:
        raise InternalConsistencyError(
            f"primal {ctx.nstr(primal, 20)} and dual {ctx.nstr(dual, 20)} disagree"
        )
    return dual
