"""Lattices: duals, Gram-Schmidt data, LLL, Babai, brute-force oracles and samplers.

A basis matrix ``B`` holds the basis vectors as its *columns*, so the lattice is
``B @ Z^n``.  Entries are kept at a fixed mpmath precision; reduction runs on
exact integers obtained by clearing the (dyadic) denominators of the entries,
so LLL itself never loses precision.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numerics import (
    DEFAULT_PREC,
    DEFAULT_TOL,
    ParameterError,
    PrecisionError,
    context,
    enumeration_plan,
    gaussian_mass,
    z_tail,
)

DEFAULT_LLL_DELTA = Fraction(3, 4)
MAX_BRUTEFORCE_POINTS = 10_000_000
MAX_EXACT_CANDIDATES = 1_000_000
# Per-coordinate smoothing slack for the randomized nearest-plane sampler.
NEAREST_PLANE_EPS = 2.0**-40


class RankDeficientError(ParameterError):
    """The basis vectors are linearly dependent."""


class WidthTooSmallError(ParameterError):
    """The sampler's width is below its validity threshold."""


def to_fraction(v) -> Fraction:
    """Exact rational value of an int, float, Fraction, decimal string or mpf."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, (float, np.floating)):
        return Fraction(float(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    mpf_tuple = getattr(v, "_mpf_", None)
    if mpf_tuple is not None:
        sign, man, exp, _ = mpf_tuple
        if man == 0:
            return Fraction(0)
        val = Fraction(int(man)) * (Fraction(2) ** exp)
        return -val if sign else val
    raise TypeError(f"cannot convert {type(v).__name__} to an exact rational")


def to_mpf(ctx, v):
    if isinstance(v, Fraction):
        return ctx.mpf(v.numerator) / v.denominator
    if isinstance(v, str) and "/" in v:
        return to_mpf(ctx, Fraction(v))
    if isinstance(v, np.generic):
        v = v.item()
    return ctx.mpf(v)


def _rows(matrix) -> list[list]:
    if hasattr(matrix, "rows") and hasattr(matrix, "cols") and hasattr(matrix, "tolist"):
        return matrix.tolist()
    arr = np.asarray(matrix, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr.tolist()


class Lattice:
    """Full-rank lattice ``B Z^n`` with cached dual, determinant and Gram-Schmidt data."""

    def __init__(self, basis, prec: int = DEFAULT_PREC):
        ctx = context(prec)
        rows = _rows(basis)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ParameterError("basis must be a square matrix")
        self.prec = prec
        self.n = n
        self.basis = ctx.matrix([[to_mpf(ctx, v) for v in r] for r in rows])
        det = ctx.det(self.basis)
        scale = max(abs(v) for v in self.basis) ** n
        if det == 0 or abs(det) <= scale * ctx.mpf(2) ** (-prec + 8):
            raise RankDeficientError("basis is singular at working precision")
        self.det = abs(det)
        self.dual_basis = (self.basis.T) ** -1
        self.gs_vectors, self.gs_mu, self.gs_norms_sq = _gram_schmidt(ctx, self.basis)
        self._reduced = None

    @property
    def ctx(self):
        return context(self.prec)

    def vectors(self) -> list[list]:
        return [[self.basis[i, j] for i in range(self.n)] for j in range(self.n)]

    @property
    def basis_float(self) -> np.ndarray:
        return np.array([[float(self.basis[i, j]) for j in range(self.n)] for i in range(self.n)])

    @property
    def key(self) -> tuple:
        return (self.prec,) + tuple(str(v) for v in self.basis)

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Lattice(n={self.n}, det={self.ctx.nstr(self.det, 8)}, prec={self.prec})"

    def dual(self) -> "Lattice":
        """Lattice generated by ``(B^T)^{-1}``."""
        return Lattice(self.dual_basis, prec=self.prec)

    def scaled(self, c) -> "Lattice":
        return Lattice(self.basis * to_mpf(self.ctx, c), prec=self.prec)

    def reduced(self) -> "Lattice":
        """Same lattice with an LLL-reduced basis (computed once)."""
        if self._reduced is None:
            red, _ = lll_reduce(self.basis, prec=self.prec)
            self._reduced = Lattice(red, prec=self.prec)
            self._reduced._reduced = self._reduced
        return self._reduced

    def coefficients(self, v: Sequence) -> list:
        """Coordinates of ``v`` in this basis (integers iff ``v`` is in the lattice)."""
        ctx = self.ctx
        col = ctx.matrix([to_mpf(ctx, x) for x in v])
        sol = self.dual_basis.T * col
        return [sol[i] for i in range(self.n)]

    def contains(self, v: Sequence, tol: float = 1e-9) -> bool:
        return all(abs(c - self.ctx.nint(c)) <= tol for c in self.coefficients(v))

    def to_json(self) -> str:
        """Rows of ``B`` as decimal strings; basis vectors are the columns."""
        digits = int(self.prec * math.log10(2)) + 2
        rows = [[self.ctx.nstr(self.basis[i, j], digits) for j in range(self.n)] for i in range(self.n)]
        return json.dumps({"format": "clwelab.lattice", "layout": "rows-of-B", "prec": self.prec, "basis": rows})

    @classmethod
    def from_json(cls, text: str) -> "Lattice":
        data = json.loads(text)
        return cls(data["basis"], prec=int(data.get("prec", DEFAULT_PREC)))


def _gram_schmidt(ctx, B):
    n = B.rows
    cols = [[B[i, j] for i in range(n)] for j in range(n)]
    bstar, norms = [], []
    mu = [[ctx.zero] * n for _ in range(n)]
    for j in range(n):
        v = list(cols[j])
        for i in range(j):
            mu[j][i] = ctx.fsum(a * b for a, b in zip(cols[j], bstar[i])) / norms[i]
            v = [a - mu[j][i] * b for a, b in zip(v, bstar[i])]
        bstar.append(v)
        norms.append(ctx.fsum(a * a for a in v))
    return bstar, mu, norms


def dual(lattice: Lattice) -> Lattice:
    return lattice.dual()


# ---------------------------------------------------------------------------
# LLL


def _integral_lll(b: list[list[int]], p: int, q: int):
    """Integral LLL on integer row vectors with Lovasz parameter ``p/q``.

    All Gram-Schmidt data are kept as exact integers (sub-determinants ``d``
    and scaled coefficients ``lam``), so every division below is exact.
    Returns the reduced rows and the transform ``H`` with ``new_i = sum_j H[i][j] old_j``.
    """
    n = len(b)
    b = [None] + [list(r) for r in b]
    H = [None] + [[int(i == j) for j in range(n)] for i in range(n)]
    d = [0] * (n + 1)
    lam = [[0] * (n + 1) for _ in range(n + 1)]
    d[0] = 1

    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))

    d[1] = dot(b[1], b[1])
    if d[1] == 0:
        raise RankDeficientError("zero basis vector")
    if n == 1:
        return b[1:], H[1:]

    def red(k, l):
        lkl = lam[k][l]
        if 2 * abs(lkl) > d[l]:
            r = (2 * lkl + d[l]) // (2 * d[l])
            bk, bl, hk, hl = b[k], b[l], H[k], H[l]
            for i in range(len(bk)):
                bk[i] -= r * bl[i]
            for i in range(n):
                hk[i] -= r * hl[i]
            lam[k][l] = lkl - r * d[l]
            lk, ll = lam[k], lam[l]
            for i in range(1, l):
                lk[i] -= r * ll[i]

    def swap(k):
        b[k], b[k - 1] = b[k - 1], b[k]
        H[k], H[k - 1] = H[k - 1], H[k]
        for j in range(1, k - 1):
            lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
        lv = lam[k][k - 1]
        bb = (d[k - 2] * d[k] + lv * lv) // d[k - 1]
        for i in range(k + 1, kmax + 1):
            t = lam[i][k]
            lam[i][k] = (d[k] * lam[i][k - 1] - lv * t) // d[k - 1]
            lam[i][k - 1] = (bb * t + lv * lam[i][k]) // d[k]
        d[k - 1] = bb

    k, kmax = 2, 1
    while k <= n:
        if k > kmax:
            kmax = k
            for j in range(1, k + 1):
                u = dot(b[k], b[j])
                for i in range(1, j):
                    u = (d[i] * u - lam[k][i] * lam[j][i]) // d[i - 1]
                if j < k:
                    lam[k][j] = u
                else:
                    d[k] = u
                    if u == 0:
                        raise RankDeficientError("basis vectors are linearly dependent")
        red(k, k - 1)
        if q * d[k] * d[k - 2] < p * d[k - 1] ** 2 - q * lam[k][k - 1] ** 2:
            swap(k)
            k = max(2, k - 1)
        else:
            for l in range(k - 2, 0, -1):
                red(k, l)
            k += 1
    return b[1:], H[1:]


def lll_reduce(basis, delta=DEFAULT_LLL_DELTA, prec: int | None = None):
    """LLL-reduce the columns of ``basis``.

    Returns ``(reduced, transform)`` where ``reduced = basis @ transform`` as an
    mpmath matrix and ``transform`` is a unimodular integer matrix given as a
    list of rows of Python ints.
    """
    delta = Fraction(delta).limit_denominator(1 << 32) if not isinstance(delta, Fraction) else delta
    if not Fraction(1, 4) < delta < 1:
        raise ParameterError("delta must lie in (1/4, 1)")
    if isinstance(basis, Lattice):
        prec = prec or basis.prec
        basis = basis.basis
    rows = _rows(basis)
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ParameterError("basis must be square")
    exact = [[to_fraction(v) for v in r] for r in rows]
    denom = 1
    for r in exact:
        for v in r:
            denom = math.lcm(denom, v.denominator)
    cols = [[int(exact[i][j] * denom) for i in range(n)] for j in range(n)]
    red_cols, H = _integral_lll(cols, delta.numerator, delta.denominator)
    ctx = context(prec or DEFAULT_PREC)
    reduced = ctx.matrix(n, n)
    for j, col in enumerate(red_cols):
        for i in range(n):
            reduced[i, j] = ctx.mpf(col[i]) / denom
    transform = [[H[j][i] for j in range(n)] for i in range(n)]
    return reduced, transform


def integer_det(matrix: list[list[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    m = [list(map(int, r)) for r in matrix]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


# ---------------------------------------------------------------------------
# Decoding and brute-force oracles


def babai_nearest_plane(lattice: Lattice, target: Sequence):
    """Babai's nearest-plane rounding on the LLL-reduced basis.

    Returns ``(v, offset)`` with ``v`` in the lattice and ``offset = target - v``.
    """
    red = lattice.reduced()
    ctx = red.ctx
    t = [to_mpf(ctx, x) for x in target]
    if len(t) != red.n:
        raise ParameterError("target dimension mismatch")
    cols = red.vectors()
    for j in reversed(range(red.n)):
        c = ctx.fsum(a * b for a, b in zip(t, red.gs_vectors[j])) / red.gs_norms_sq[j]
        x = ctx.nint(c)
        if x:
            t = [a - x * b for a, b in zip(t, cols[j])]
    v = [to_mpf(ctx, a) - b for a, b in zip(target, t)]
    return v, t


def _box_chunks(centre: np.ndarray, radius: int, chunk: int = 1_000_000):
    n = len(centre)
    side = 2 * radius + 1
    total = side**n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = np.empty((len(idx), n), dtype=np.int64)
        for j in range(n):
            digits[:, j] = idx % side
            idx = idx // side
        yield digits - radius + centre


def _check_box(n: int, radius: int):
    if n > 4:
        raise ParameterError("brute force is limited to dimension <= 4")
    if (2 * radius + 1) ** n > MAX_BRUTEFORCE_POINTS:
        raise ParameterError(f"coefficient box (2*{radius}+1)^{n} exceeds {MAX_BRUTEFORCE_POINTS}")


def proven_coefficient_radius(lattice: Lattice) -> int:
    """Coefficient bound guaranteed to contain a shortest vector.

    A vector ``v = B x`` has ``x_j = <v, d_j>`` for the dual basis ``d_j``;
    any shortest vector is no longer than the shortest basis column.
    """
    ctx = lattice.ctx
    shortest_col = min(ctx.sqrt(ctx.fsum(a * a for a in v)) for v in lattice.vectors())
    dual_rows = lattice.dual().vectors()
    longest_dual = max(ctx.sqrt(ctx.fsum(a * a for a in v)) for v in dual_rows)
    return max(1, int(ctx.floor(shortest_col * longest_dual)))


def _min_over_box(lattice: Lattice, centre, radius: int, target=None, exclude_zero=True):
    B = lattice.basis_float
    t = np.zeros(lattice.n) if target is None else np.asarray([float(x) for x in target])
    best, cands = np.inf, []
    for X in _box_chunks(np.asarray(centre, dtype=np.int64), radius):
        d = np.sum((X @ B.T - t) ** 2, axis=1)
        if exclude_zero:
            d[np.all(X == 0, axis=1)] = np.inf
        m = d.min()
        if m < best * (1 + 1e-9):
            keep = X[d <= m * (1 + 1e-9) + 1e-300]
            if m < best * (1 - 1e-9):
                cands = []
            best = min(best, m)
            cands.extend(map(tuple, keep))
    ctx = lattice.ctx
    cols = lattice.vectors()
    tt = [ctx.zero] * lattice.n if target is None else [to_mpf(ctx, x) for x in target]

    def exact_sq(x):
        v = [ctx.fsum(int(x[j]) * cols[j][i] for j in range(lattice.n)) for i in range(lattice.n)]
        return ctx.fsum((a - b) ** 2 for a, b in zip(v, tt)), v

    scored = sorted((exact_sq(x) + (x,) for x in cands), key=lambda r: r[0])
    return scored[0][1], list(scored[0][2])


def shortest_vector_bruteforce(lattice: Lattice, coeff_radius: int | None = None):
    """Shortest nonzero vector among integer combinations with ``|x_i| <= coeff_radius``."""
    if coeff_radius is None:
        coeff_radius = proven_coefficient_radius(lattice)
    _check_box(lattice.n, coeff_radius)
    v, _ = _min_over_box(lattice, np.zeros(lattice.n, dtype=np.int64), coeff_radius)
    return v


def closest_vector_bruteforce(lattice: Lattice, target: Sequence, coeff_radius: int = 3):
    """Closest lattice vector to ``target`` over a coefficient box around its rounded coordinates."""
    _check_box(lattice.n, coeff_radius)
    centre = [int(lattice.ctx.nint(c)) for c in lattice.coefficients(target)]
    v, _ = _min_over_box(lattice, centre, coeff_radius, target=target, exclude_zero=False)
    return v


def vector_norm(v, prec: int = DEFAULT_PREC):
    ctx = context(prec)
    return ctx.sqrt(ctx.fsum(to_mpf(ctx, a) ** 2 for a in v))


def successive_minima(lattice: Lattice) -> list:
    """``lambda_1 .. lambda_n`` by exhaustive enumeration (dimension <= 4)."""
    red = lattice.reduced()
    ctx = red.ctx
    bound = max(vector_norm(v, red.prec) for v in red.vectors())
    dual_norms = [vector_norm(v, red.prec) for v in red.dual().vectors()]
    radius = max(int(ctx.floor(bound * max(dual_norms))), 1)
    _check_box(red.n, radius)
    B = red.basis_float
    limit = float(bound) ** 2 * (1 + 1e-9)
    pts = []
    for X in _box_chunks(np.zeros(red.n, dtype=np.int64), radius):
        V = X @ B.T
        d = np.sum(V * V, axis=1)
        ok = (d <= limit) & np.any(X != 0, axis=1)
        pts.extend(zip(d[ok], map(tuple, X[ok])))
    pts.sort()
    chosen, minima = [], []
    for _, x in pts:
        trial = chosen + [x]
        if np.linalg.matrix_rank(np.array(trial, dtype=float)) == len(trial):
            chosen = trial
            v = [ctx.fsum(x[j] * red.basis[i, j] for j in range(red.n)) for i in range(red.n)]
            minima.append(vector_norm(v, red.prec))
            if len(chosen) == red.n:
                break
    return minima


# ---------------------------------------------------------------------------
# Smoothing parameter


@dataclass(frozen=True)
class SmoothingBounds:
    epsilon: float
    lower: object
    upper_dual: object
    upper_primal: object
    c: float
    dual_verified: bool
    primal_verified: bool

    @property
    def upper(self):
        return min(self.upper_dual, self.upper_primal)


def dual_tail_mass(lattice: Lattice, s, tol: float = DEFAULT_TOL):
    """Upper bound on ``rho_{1/s}(L* minus 0)``."""
    res = gaussian_mass(lattice.dual(), 1 / lattice.ctx.mpf(s), tol)
    return float(res.mass) - 1.0 + res.tail_bound


def smoothing_bounds(lattice: Lattice, epsilon: float) -> SmoothingBounds:
    """Lower bound and the two upper bounds on ``eta_epsilon(L)``.

    The dual-side upper bound is stated for ``epsilon = exp(-c^2 n)``; ``c`` is
    solved from ``epsilon``.  Both upper bounds are checked by evaluating the
    dual theta series directly.
    """
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    ctx = lattice.ctx
    n = lattice.n
    lam1_dual = vector_norm(shortest_vector_bruteforce(lattice.dual().reduced()), lattice.prec)
    lam_n = successive_minima(lattice)[-1]
    log_inv = -ctx.log(ctx.mpf(epsilon))
    c = ctx.sqrt(log_inv / n)
    lower = ctx.sqrt(log_inv / ctx.pi) / lam1_dual
    upper_dual = c * ctx.sqrt(n) / lam1_dual
    upper_primal = ctx.sqrt(ctx.log(2 * n * (1 + 1 / ctx.mpf(epsilon))) / ctx.pi) * lam_n
    tol = epsilon * 1e-6
    return SmoothingBounds(
        epsilon=epsilon,
        lower=lower,
        upper_dual=upper_dual,
        upper_primal=upper_primal,
        c=float(c),
        dual_verified=dual_tail_mass(lattice, upper_dual, tol) <= epsilon,
        primal_verified=dual_tail_mass(lattice, upper_primal, tol) <= epsilon,
    )


def smoothing_parameter(lattice: Lattice, epsilon: float, rel_tol: float = 1e-10):
    """``eta_epsilon(L)`` by bisection on the dual theta series (returns an upper end)."""
    b = smoothing_bounds(lattice, epsilon)
    lo, hi = float(b.lower), float(b.upper_primal)
    tol = epsilon * 1e-8
    while dual_tail_mass(lattice, hi, tol) > epsilon:
        hi *= 1.5
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if dual_tail_mass(lattice, mid, tol) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Discrete Gaussian sampling


def sample_dz(s: float, centers, rng: np.random.Generator) -> np.ndarray:
    """Vectorised exact rejection sampler for ``D_{Z, s, c}`` (pmf ``∝ rho_s(k - c)``).

    Proposal: two-sided geometric around ``round(c)`` with rate ``sqrt(2 pi)/s``;
    acceptance ``rho_s(k - c) / (M q(k))`` with ``M`` the closed-form supremum.
    """
    if s <= 0:
        raise ParameterError("width must be positive")
    centers = np.asarray(centers, dtype=float)
    flat = centers.ravel()
    out = np.empty(flat.shape, dtype=np.int64)
    lam = math.sqrt(2 * math.pi) / s
    p = -math.expm1(-lam)
    log_m = lam * lam * s * s / (4 * math.pi) + lam / 2
    todo = np.arange(flat.size)
    while todo.size:
        c = flat[todo]
        m = np.rint(c)
        d = rng.geometric(p, size=todo.size) - rng.geometric(p, size=todo.size)
        k = m + d
        log_acc = -math.pi * (k - c) ** 2 / (s * s) + lam * np.abs(d) - log_m
        ok = np.log(rng.random(todo.size)) < log_acc
        out[todo[ok]] = k[ok].astype(np.int64)
        todo = todo[~ok]
    return out.reshape(centers.shape)


class IntegerGaussianTable:
    """Inverse-CDF sampler for ``D_{Z, s}`` centred at ``center`` (fixed).

    Support is ``|k - center| <= 8 * ceil(s) + 1``; the omitted mass is below
    ``exp(-64 pi)`` relative, certified by :func:`numerics.z_tail`.
    """

    def __init__(self, s: float, center: float = 0.0, prec: int = DEFAULT_PREC):
        if s <= 0:
            raise ParameterError("width must be positive")
        ctx = context(prec)
        self.s, self.center = float(s), float(center)
        half = 8 * math.ceil(s) + 1
        base = round(center)
        self.support = np.arange(base - half, base + half + 1, dtype=np.int64)
        sm = ctx.mpf(s)
        w = [ctx.exp(-ctx.pi * (int(k) - ctx.mpf(center)) ** 2 / sm**2) for k in self.support]
        total = ctx.fsum(w)
        self.tail_bound = z_tail(self.s, half - 0.5) / float(total)
        self.pmf = np.array([float(x / total) for x in w])
        acc = list(itertools.accumulate(w))
        self.cdf = np.array([float(a / total) for a in acc])
        self.cdf[-1] = 1.0

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        u = rng.random(size)
        return self.support[np.searchsorted(self.cdf, u, side="right")]


@functools.lru_cache(maxsize=64)
def integer_gaussian_table(s: float, center: float = 0.0) -> IntegerGaussianTable:
    return IntegerGaussianTable(s, center)


@dataclass(frozen=True)
class DiscreteGaussianSpec:
    """``D_{shift + L, width}``; ``mode`` is ``"exact"`` or ``"nearest-plane"``."""

    lattice: Lattice
    width: float
    coset_shift: tuple | None = None
    mode: str = "exact"

    def __post_init__(self):
        if self.width <= 0:
            raise ParameterError("width must be positive")
        if self.mode not in ("exact", "nearest-plane"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.mode == "exact" and self.lattice.n > 3:
            raise ParameterError("exact enumeration is limited to dimension <= 3")
        if self.coset_shift is not None:
            if len(self.coset_shift) != self.lattice.n:
                raise ParameterError("coset shift dimension mismatch")
            object.__setattr__(self, "coset_shift", tuple(float(x) for x in self.coset_shift))

    @property
    def shift(self) -> np.ndarray:
        if self.coset_shift is None:
            return np.zeros(self.lattice.n)
        return np.asarray(self.coset_shift, dtype=float)


def enumerate_box(gs_norms, mu, centre_gs, halfwidths):
    """All coefficient vectors in the Gram-Schmidt box, vectorised.

    Returns ``(coeffs, sqnorm)`` where ``sqnorm`` is the squared length of the
    shifted point ``sum_j (x_j + shift_j)^2 * ||b*_j||^2``.
    """
    n = len(gs_norms)
    mu = np.asarray(mu, dtype=float)
    coeffs = np.zeros((1, n), dtype=np.int64)
    shifts = np.asarray(centre_gs, dtype=float).reshape(1, n).copy()
    sq = np.zeros(1)
    for j in reversed(range(n)):
        k = halfwidths[j]
        span = np.arange(-math.ceil(k) - 1, math.ceil(k) + 2)
        x = np.rint(-shifts[:, j])[:, None] + span[None, :]
        t = x + shifts[:, j][:, None]
        rows, cols = np.nonzero(np.abs(t) <= k)
        if rows.size > MAX_EXACT_CANDIDATES * 4:
            raise ParameterError("candidate set too large for exact enumeration")
        xs, ts = x[rows, cols], t[rows, cols]
        coeffs = coeffs[rows]
        coeffs[:, j] = xs.astype(np.int64)
        sq = sq[rows] + ts * ts * gs_norms[j] ** 2
        shifts = shifts[rows] + xs[:, None] * mu[j][None, :]
    return coeffs, sq


@functools.lru_cache(maxsize=32)
def _exact_table(lattice: Lattice, width: float, shift: tuple):
    red = lattice.reduced()
    gs_norms = [math.sqrt(float(v)) for v in red.gs_norms_sq]
    mu = [[float(red.gs_mu[j][i]) if i < j else 0.0 for i in range(red.n)] for j in range(red.n)]
    c = np.asarray(shift, dtype=float)
    centre_gs = [float(np.dot(c, [float(a) for a in red.gs_vectors[j]])) / gs_norms[j] ** 2 for j in range(red.n)]
    tol = 1e-13
    while True:
        halfwidths, tail = enumeration_plan(gs_norms, width, tol)
        if math.prod(2 * k + 1 for k in halfwidths) > MAX_EXACT_CANDIDATES * 4:
            raise ParameterError("width too large for exact enumeration")
        coeffs, sq = enumerate_box(gs_norms, mu, centre_gs, halfwidths)
        logw = -math.pi * sq / width**2
        top = logw.max()
        w = np.exp(logw - top)
        partial = w.sum() * math.exp(top)
        if tail < 1e-12 * partial:
            break
        tol /= 1e3
        if tol < 1e-200:
            raise PrecisionError("cannot certify the excluded mass")
    if len(w) > MAX_EXACT_CANDIDATES:
        raise ParameterError("more than 1e6 candidate points")
    points = c[None, :] + coeffs @ red.basis_float.T
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return points, w / w.sum(), cdf, tail / partial


def exact_pmf(spec: DiscreteGaussianSpec):
    """Candidate points, their probabilities, and the relative excluded mass."""
    points, pmf, _, excluded = _exact_table(spec.lattice, float(spec.width), tuple(spec.shift))
    return points, pmf, excluded


def nearest_plane_threshold(lattice: Lattice) -> float:
    red = lattice.reduced()
    eta_z = math.sqrt(math.log(2 * (1 + 1 / NEAREST_PLANE_EPS)) / math.pi)
    return eta_z * max(math.sqrt(float(v)) for v in red.gs_norms_sq)


def sample_discrete_gaussian(spec: DiscreteGaussianSpec, rng: np.random.Generator, size: int | None = None):
    """Draw from ``D_{shift + L, width}``; returns shape ``(n,)`` or ``(size, n)`` floats."""
    count = 1 if size is None else int(size)
    if spec.mode == "exact":
        points, _, cdf, _ = _exact_table(spec.lattice, float(spec.width), tuple(spec.shift))
        idx = np.searchsorted(cdf, rng.random(count), side="right")
        out = points[np.minimum(idx, len(points) - 1)]
    else:
        threshold = nearest_plane_threshold(spec.lattice)
        if spec.width < threshold:
            raise WidthTooSmallError(
                f"width {spec.width:g} below nearest-plane validity threshold {threshold:g}"
            )
        red = spec.lattice.reduced()
        B = red.basis_float
        bstar = np.array([[float(a) for a in v] for v in red.gs_vectors])
        norms_sq = np.array([float(v) for v in red.gs_norms_sq])
        # Sample v ~ D_{L, width, -shift}; then v + shift ~ D_{shift + L, width}.
        t = np.tile(-spec.shift, (count, 1))
        v = np.zeros((count, red.n))
        for j in reversed(range(red.n)):
            cj = t @ bstar[j] / norms_sq[j]
            z = sample_dz(spec.width / math.sqrt(norms_sq[j]), cj, rng)
            t -= z[:, None] * B[:, j][None, :]
            v += z[:, None] * B[:, j][None, :]
        out = v + spec.shift
    return out[0] if size is None else out
