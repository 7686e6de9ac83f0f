"""Attacks and calculators: LLL noiseless solver, covariance test, SQ quantities, TV estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .distributions import ClweParams, HiddenDirection, SampleBatch, density_ratio, mixture_components
from .lattice import Lattice, RankDeficientError, lll_reduce, to_mpf
from .numerics import DEFAULT_PREC, ParameterError, context, gaussian_mass, solver_precision, width_to_std

TWO_PI_INV = 1.0 / (2.0 * math.pi)


class SingularSystemError(ArithmeticError):
    """The harvested equations do not determine the direction."""


class ShortVectorError(ArithmeticError):
    """LLL returned a vector longer than the proven bound."""


# ---------------------------------------------------------------------------
# LLL attack on noiseless CLWE


@dataclass
class NoiselessSolveReport:
    recovered_direction: np.ndarray
    recovered_precise: list
    equations_used: list
    residual: float
    sample_residual: float
    norm_before_normalization: float
    trials: int
    success: bool
    precision_bits: int
    short_vector_norms: list = field(default_factory=list)

    def matches(self, w, tol: float = 1e-6) -> bool:
        """True when ``+w`` or ``-w`` agrees per coordinate within ``tol``."""
        w = np.asarray(getattr(w, "w", w), dtype=float)
        err = min(np.max(np.abs(self.recovered_direction - w)), np.max(np.abs(self.recovered_direction + w)))
        return bool(err <= tol)


def _mp_solve(ctx, A, b):
    """Gaussian elimination with partial pivoting at the context's precision."""
    n = len(b)
    M = [list(A[i]) + [b[i]] for i in range(n)]
    scale = max(abs(x) for row in A for x in row)
    floor = scale * ctx.mpf(2) ** (-ctx.prec // 2)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) <= floor:
            raise SingularSystemError("equation system is singular at working precision")
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, n):
            f = M[r][col] / M[col][col]
            if f:
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    x = [ctx.zero] * n
    for i in reversed(range(n)):
        x[i] = (M[i][n] - ctx.fsum(M[i][j] * x[j] for j in range(i + 1, n))) / M[i][i]
    return x


def _harvest_equation(ctx, ys, zs, n, delta_exp, delta_lll):
    """One short combination ``(y, z)`` from ``n+1`` samples, with ``|gamma<y,w>| = |z|``."""
    Y = ctx.matrix(n + 1, n + 1)
    for j in range(n + 1):
        for i in range(n):
            Y[i, j] = ys[j][i]
    Y[n, n] = ctx.mpf(2) ** (-delta_exp)
    reduced, T = lll_reduce(Y, delta_lll, prec=ctx.prec)
    c = [T[i][0] for i in range(n + 1)]
    y = [reduced[i, 0] for i in range(n)]
    z = ctx.fsum(ci * zi for ci, zi in zip(c, zs))
    z = z - ctx.ceil(z - ctx.mpf(1) / 2)
    norm = ctx.sqrt(ctx.fsum(a * a for a in y))
    return y, z, norm, c


def solve_noiseless_clwe(
    batch: SampleBatch,
    gamma: float,
    rng: np.random.Generator | None = None,
    delta_lll=0.75,
    tol: float = 1e-6,
    max_escalations: int = 2,
) -> NoiselessSolveReport:
    """Recover ``w`` from noiseless CLWE samples with LLL.

    Each equation uses ``n+1`` fresh samples: LLL on the columns of
    ``[[y_1 .. y_{n+1}], [0 .. 0 delta]]`` with ``delta = 2^(-3n^2)`` yields a
    short integer combination ``y``; the matching combination of the ``z_i``,
    taken in ``(-1/2, 1/2]``, equals ``gamma <y, w>`` exactly.  Singular
    systems draw a fresh equation while samples remain.
    """
    if batch.fidelity != "precise" or not batch.has_z:
        raise ParameterError("solver needs a precise (y, z) batch")
    n = batch.n
    if len(batch) < n * (n + 1):
        raise ParameterError(f"need at least n(n+1) = {n * (n + 1)} samples")
    prec = max(int(batch.meta.get("prec", DEFAULT_PREC)), solver_precision(n))
    bound = math.sqrt(n) * 2.0 ** (-(n - 1) / 2)
    order = np.arange(len(batch)) if rng is None else rng.permutation(len(batch))
    for attempt in range(max_escalations + 1):
        ctx = context(prec)
        ys = [[ctx.mpf(v) for v in batch.y[k]] for k in order]
        zs = [ctx.mpf(batch.z[k]) for k in order]
        try:
            return _solve(ctx, ys, zs, n, gamma, delta_lll, tol, bound)
        except ShortVectorError:
            prec *= 2
    raise ShortVectorError("short-vector bound still violated after precision escalation")


def _solve(ctx, ys, zs, n, gamma, delta_lll, tol, bound):
    g = to_mpf(ctx, gamma)
    eqs, norms, used = [], [], 0
    trials = 0
    while True:
        while len(eqs) < n:
            if used + n + 1 > len(ys):
                raise SingularSystemError("ran out of samples before collecting n independent equations")
            y, z, norm, _ = _harvest_equation(ctx, ys[used:used + n + 1], zs[used:used + n + 1], n, 3 * n * n, delta_lll)
            used += n + 1
            trials += 1
            if norm > bound:
                raise ShortVectorError(f"short vector norm {float(norm):.3g} exceeds {bound:.3g}")
            eqs.append((y, z))
            norms.append(float(norm))
        A = [[g * a for a in y] for y, _ in eqs]
        b = [z for _, z in eqs]
        try:
            w = _mp_solve(ctx, A, b)
            break
        except SingularSystemError:
            if used + n + 1 > len(ys):
                raise
            eqs.pop()
    residual = max(abs(g * ctx.fsum(a * c for a, c in zip(y, w)) - z) for y, z in eqs)
    norm = ctx.sqrt(ctx.fsum(a * a for a in w))
    unit = [a / norm for a in w]
    sample_res = ctx.zero
    for yk, zk in zip(ys[:used], zs[:used]):
        r = g * ctx.fsum(a * c for a, c in zip(yk, unit)) - zk
        sample_res = max(sample_res, abs(r - ctx.nint(r)))
    success = residual <= tol and abs(norm - 1) <= tol and sample_res <= tol
    return NoiselessSolveReport(
        recovered_direction=np.array([float(a) for a in unit]),
        recovered_precise=unit,
        equations_used=eqs,
        residual=float(residual),
        sample_residual=float(sample_res),
        norm_before_normalization=float(norm),
        trials=trials,
        success=bool(success),
        precision_bits=ctx.prec,
        short_vector_norms=norms,
    )


# ---------------------------------------------------------------------------
# Covariance distinguisher


def sample_covariance(batch, chunk: int = 200_000) -> np.ndarray:
    """``(1/m) A^T A`` with the samples as rows of ``A``; no centring."""
    A = batch.as_float().y if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))
    m = A.shape[0]
    if m == 0:
        raise ParameterError("empty batch")
    C = np.zeros((A.shape[1], A.shape[1]))
    for s in range(0, m, chunk):
        part = A[s:s + chunk]
        C += part.T @ part
    return C / m


def symmetric_eigenvalues(M, tol: float = 1e-12, vectors: bool = False, max_sweeps: int = 60):
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("matrix must be square")
    n = A.shape[0]
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    if np.max(np.abs(A - A.T), initial=0.0) > tol * scale:
        raise ParameterError("matrix is not symmetric within tolerance")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.square(A[~np.eye(n, dtype=bool)])))
        # Off-diagonal mass at the rounding floor: eigenvalues are accurate to ~eps * scale.
        if off <= 10 * n * eps * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= eps * eps * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * cp - s * cq, s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * rp - s * rq, s * rp + c * rq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    vals = np.diag(A).copy()
    idx = np.argsort(vals)
    if vectors:
        return vals[idx], V[:, idx]
    return vals[idx]


def covariance_threshold(beta: float, gamma: float) -> float:
    return 0.5 * gamma**2 * math.exp(-math.pi * (beta**2 + gamma**2))


@dataclass
class CovarianceReport:
    eigenvalues: np.ndarray
    threshold: float
    decision: str
    max_deviation: float
    extremal_vector: np.ndarray

    @property
    def displaced(self) -> int:
        """Number of eigenvalues farther than the threshold from ``1/(2 pi)``."""
        return int(np.sum(np.abs(self.eigenvalues - TWO_PI_INV) > self.threshold))

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "threshold": self.threshold,
            "max_deviation": self.max_deviation,
            "eigenvalues": [float(x) for x in self.eigenvalues],
        }


def covariance_report(cov: np.ndarray, beta: float, gamma: float) -> CovarianceReport:
    vals, vecs = symmetric_eigenvalues(cov, tol=1e-10, vectors=True)
    dev = np.abs(vals - TWO_PI_INV)
    thr = covariance_threshold(beta, gamma)
    k = int(np.argmax(dev))
    # A deviation exactly at the threshold counts as null.
    decision = "hCLWE" if dev[k] > thr else "null"
    return CovarianceReport(vals, thr, decision, float(dev[k]), vecs[:, k])


def covariance_distinguisher(batch, beta: float, gamma: float) -> CovarianceReport:
    return covariance_report(sample_covariance(batch), beta, gamma)


def noiseless_covariance_gap(gamma: float, tol: float = 1e-12) -> float:
    """``|E[x^2] - 1/(2 pi)|`` for ``x ~ D_{(1/gamma) Z}`` via the theta oracle."""
    from .numerics import discrete_gaussian_second_moment

    return float(abs(discrete_gaussian_second_moment(gamma, tol) - TWO_PI_INV))


def hclwe_hidden_variance(beta: float, gamma: float, tol: float = 1e-12) -> float:
    """Second moment of ``<y, w>`` under hCLWE, via the noise-and-rescale construction.

    hCLWE(beta, gamma) arises from noiseless hCLWE at ``g0 = gamma sqrt(1 + r^2)``
    with ``r = beta/gamma``, so the moment is ``(m2(g0) + r^2/(2 pi)) / (1 + r^2)``.
    """
    from .numerics import discrete_gaussian_second_moment

    r = beta / gamma
    g0 = gamma * math.sqrt(1 + r * r)
    m2 = float(discrete_gaussian_second_moment(g0, tol))
    return (m2 + r * r * TWO_PI_INV) / (1 + r * r)


# ---------------------------------------------------------------------------
# Statistical-query quantities


@dataclass(frozen=True)
class SqCorrParams:
    alpha: float
    beta: float
    gamma: float
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ParameterError("alpha must lie in [0, 1]")
        if not 0 < self.beta < 1:
            raise ParameterError("beta must lie in (0, 1)")
        if self.gamma < 1:
            raise ParameterError("gamma must be >= 1")

    def _mp(self):
        ctx = context(self.prec)
        return ctx, to_mpf(ctx, self.alpha), to_mpf(ctx, self.beta), to_mpf(ctx, self.gamma)

    @property
    def zeta(self):
        ctx, a, b, g = self._mp()
        s2 = b * b + g * g
        return ctx.sqrt(s2 - a * a * g**4 / s2)

    @property
    def B1(self):
        ctx, a, b, g = self._mp()
        r = 1 / ctx.sqrt(b * b + g * g)
        return ctx.matrix([[r, 0], [0, r]])

    @property
    def B2(self):
        ctx, a, b, g = self._mp()
        s = ctx.sqrt(b * b + g * g)
        zeta = self.zeta
        return ctx.matrix([[1, 0], [-a * g * g / (zeta * s), s / zeta]]) / s

    @property
    def L1(self) -> Lattice:
        return Lattice(self.B1, prec=self.prec)

    @property
    def L2(self) -> Lattice:
        return Lattice(self.B2, prec=self.prec)


@dataclass(frozen=True)
class SqCorrValue:
    """``chi`` plus the applicable bound; ``chain_value`` is set for ``alpha = 1``."""

    chi: object
    bound: float
    bound_kind: str
    chain_value: object = None

    def __float__(self):
        return float(self.chi)


def sq_corr_closed_form(p: SqCorrParams, tol: float = 1e-12) -> SqCorrValue:
    """Pairwise correlation ``chi = rho(L2*)/rho(L1*) - 1``."""
    d1 = p.L1.dual()
    d2 = p.L2.dual()
    m1 = gaussian_mass(d1, 1, tol).mass
    m2 = gaussian_mass(d2, 1, tol).mass
    chi = m2 / m1 - 1
    ctx = context(p.prec)
    if p.alpha == 1:
        g, b = to_mpf(ctx, p.gamma), to_mpf(ctx, p.beta)
        scaled = d2.scaled(g / b)
        chain = (g / b) ** 2 * gaussian_mass(scaled, 1, tol).mass / m1 - 1
        return SqCorrValue(chi, 2 * (p.gamma / p.beta) ** 2, "same-direction", chain)
    return SqCorrValue(chi, 8 * math.exp(-math.pi * p.gamma**2 * (1 - p.alpha**2)), "distinct-direction")


def sq_corr_monte_carlo(v, w, beta: float, gamma: float, N: int, rng: np.random.Generator, chunk: int = 500_000):
    """Estimate ``E[a(<x,w>) a(<x,v>)] - 1`` over ``x ~ D_{R^n}``; returns ``(estimate, std_error)``."""
    if N < 10_000:
        raise ParameterError("N must be >= 1e4")
    v = np.asarray(getattr(v, "w", v), dtype=float)
    w = np.asarray(getattr(w, "w", w), dtype=float)
    total = total_sq = 0.0
    done = 0
    while done < N:
        k = min(chunk, N - done)
        x = rng.standard_normal((k, v.size)) * width_to_std(1.0)
        prod = density_ratio(x @ w, beta, gamma) * density_ratio(x @ v, beta, gamma) - 1
        total += prod.sum()
        total_sq += (prod * prod).sum()
        done += k
    mean = total / N
    var = max(total_sq / N - mean * mean, 0.0)
    return mean, math.sqrt(var / (N - 1))


@dataclass
class Packing:
    vectors: np.ndarray
    attempts: int
    target_size: int

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def complete(self) -> bool:
        return self.size >= self.target_size


def generate_packing(
    n: int,
    alpha_max: float = 1 / math.sqrt(2),
    target_size: int = 100,
    rng: np.random.Generator | None = None,
    max_attempts: int = 1_000_000,
    block: int = 256,
) -> Packing:
    """Random unit vectors with pairwise ``|<u, v>| <= alpha_max``, kept greedily."""
    if n < 2:
        raise ParameterError("n must be >= 2")
    rng = rng or np.random.default_rng()
    kept = np.zeros((0, n))
    attempts = 0
    while kept.shape[0] < target_size and attempts < max_attempts:
        k = min(block, max_attempts - attempts)
        cand = rng.standard_normal((k, n))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        ok = np.all(np.abs(cand @ kept.T) <= alpha_max, axis=1) if kept.size else np.ones(k, bool)
        for i in range(k):
            attempts += 1
            if ok[i] and (kept.shape[0] == 0 or np.all(np.abs(kept @ cand[i]) <= alpha_max)):
                kept = np.vstack([kept, cand[i]])
                if kept.shape[0] >= target_size:
                    break
    return Packing(kept, attempts, target_size)


@dataclass(frozen=True)
class SqBoundParams:
    tau: float
    eta: float
    packing_size: int
    delta_corr: float
    eps_corr: float

    def __post_init__(self):
        if self.eta < 0.5 or self.eta > 1:
            raise ParameterError("eta must lie in [1/2, 1]")
        if self.tau < math.sqrt(2 * self.eps_corr) * (1 - 1e-12):
            raise ParameterError(f"tau={self.tau:g} is below sqrt(2*eps_corr)={math.sqrt(2 * self.eps_corr):g}")

    @classmethod
    def for_hclwe(cls, tau: float, eta: float, packing_size: int, beta: float, gamma: float) -> "SqBoundParams":
        """Constants for a packing with pairwise correlation at most ``1/sqrt(2)``."""
        return cls(tau, eta, packing_size, 2 * (gamma / beta) ** 2, 8 * math.exp(-math.pi * gamma**2 / 2))


def sq_query_lower_bound(p: SqBoundParams) -> float:
    """``(2 eta - 1) |U| tau^2 / (2 delta_corr)`` queries."""
    return (2 * p.eta - 1) * p.packing_size * p.tau**2 / (2 * p.delta_corr)


# ---------------------------------------------------------------------------
# Density equality test and TV estimates


def density_equality_test(f: Callable, n: int, delta: float, rng: np.random.Generator) -> bool:
    """True (YES, ``f`` is the standard Gaussian) iff ``f/D`` stays in ``[1 - sqrt(delta), 1 + sqrt(delta)]``.

    Uses ``ceil(1/(6 sqrt(delta)))`` points drawn from ``D_{R^n}``.
    """
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    m = math.ceil(1 / (6 * math.sqrt(delta)))
    x = rng.standard_normal((m, n)) * width_to_std(1.0)
    ratio = np.asarray(f(x), dtype=float) / np.exp(-np.pi * np.sum(x * x, axis=1))
    r = math.sqrt(delta)
    return bool(np.all((ratio >= 1 - r) & (ratio <= 1 + r)))


@dataclass(frozen=True)
class TvEstimate:
    value: float
    step: float
    halvings: int
    crossings: int


def signed_mixture_tv(coef, means, stds, T: float = 8.0, tol: float = 1e-8, max_halvings: int = 20) -> TvEstimate:
    """``(1/2) int_{-T}^{T} |sum_j c_j N(t; mu_j, sd_j^2)| dt``.

    The sign pattern is located on a grid (crossings refined by root finding)
    and each signed piece is integrated exactly with normal CDFs.  The grid
    step is halved until two successive values agree within ``tol``.
    """
    coef = np.asarray(coef, dtype=float)
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)

    def g(t):
        t = np.asarray(t, dtype=float)[..., None]
        return (coef * np.exp(-0.5 * ((t - means) / stds) ** 2) / (stds * math.sqrt(2 * math.pi))).sum(-1)

    def cdf_sum(t):
        return (coef * ndtr((np.asarray(t)[..., None] - means) / stds)).sum(-1)

    def estimate(step):
        grid = np.linspace(-T, T, int(math.ceil(2 * T / step)) + 1)
        vals = g(grid)
        sign = np.sign(vals)
        idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        roots = [brentq(lambda x: float(g(x)), grid[i], grid[i + 1], xtol=1e-15) for i in idx]
        edges = np.array([-T] + roots + [T])
        pieces = cdf_sum(edges[1:]) - cdf_sum(edges[:-1])
        return 0.5 * float(np.abs(pieces).sum()), len(roots)

    step = float(min(stds.min(), 0.05))
    prev, _ = estimate(step)
    for k in range(1, max_halvings + 1):
        step /= 2
        val, nroots = estimate(step)
        if abs(val - prev) <= tol:
            return TvEstimate(val, step, k, nroots)
        prev = val
    raise ArithmeticError("quadrature did not stabilise")


def _full_mixture(beta: float, gamma: float):
    width = math.hypot(beta, gamma)
    k = 8 * math.ceil(width)
    weights, means, widths = mixture_components(beta, gamma, k)
    return weights / weights.sum(), means, width_to_std(widths)


def hclwe_tv_lower_estimate(beta: float, gamma: float, T: float = 8.0, tol: float = 1e-8) -> TvEstimate:
    """TV between hCLWE and ``D_{R^n}`` along the hidden axis (equal to the full TV)."""
    if not 0 < beta:
        raise ParameterError("beta must be > 0")
    if gamma < 1:
        raise ParameterError("gamma must be >= 1")
    w, mu, sd = _full_mixture(beta, gamma)
    coef = np.append(w, -1.0)
    means = np.append(mu, 0.0)
    stds = np.append(sd, width_to_std(1.0))
    return signed_mixture_tv(coef, means, stds, T, tol)


def truncation_tv(beta: float, gamma: float, k: int, T: float = 8.0, tol: float = 1e-8) -> TvEstimate:
    """TV between hCLWE and its ``2k+1``-layer truncation along the hidden axis.

    The difference is written directly as a signed mixture (outer layers minus
    the renormalisation excess of the inner ones) to avoid cancellation.
    """
    w, mu, sd = _full_mixture(beta, gamma)
    K = (w.size - 1) // 2
    j = np.arange(-K, K + 1)
    inner = np.abs(j) <= k
    eps = w[~inner].sum()
    coef = np.where(inner, -w * eps / (1 - eps), w)
    return signed_mixture_tv(coef, mu, sd, T, tol)
