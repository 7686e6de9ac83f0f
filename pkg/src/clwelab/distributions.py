"""Samplers and densities for CLWE, homogeneous CLWE and their null distributions.

Every width is a ``rho_s`` width (covariance ``s^2/(2 pi)``).  Statistics
paths use float64 batches; the noiseless solver consumes ``precise`` batches
whose entries are mpmath numbers at a stated precision.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lattice import Lattice, integer_gaussian_table, to_fraction, to_mpf
from .numerics import DEFAULT_PREC, ParameterError, context, gaussian_mass, width_to_std

DENSITY_REL_TOL = 1e-12


@dataclass(frozen=True)
class ClweParams:
    n: int
    beta: float
    gamma: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be a positive integer")
        if not self.beta >= 0:
            raise ParameterError("beta must be >= 0")
        if not self.gamma > 0:
            raise ParameterError("gamma must be > 0")

    @property
    def mixture_width(self) -> float:
        """``sqrt(beta^2 + gamma^2)``, the width of the component-index distribution."""
        return math.hypot(self.beta, self.gamma)

    @property
    def layer_spacing(self) -> float:
        return self.gamma / (self.beta**2 + self.gamma**2)

    @property
    def component_width(self) -> float:
        return self.beta / self.mixture_width

    def hardness_regime(self, poly_bound: float | None = None) -> bool:
        """True when ``gamma >= 2 sqrt(n)`` and ``gamma/beta <= poly_bound`` (if given)."""
        if self.gamma < 2 * math.sqrt(self.n):
            return False
        if poly_bound is None:
            return True
        return self.beta > 0 and self.gamma / self.beta <= poly_bound


class HiddenDirection:
    """Unit vector ``w``; keeps an exact rational copy when one was supplied."""

    def __init__(self, w: Sequence, normalize: bool = True):
        self._exact = None
        try:
            self._exact = tuple(to_fraction(x) for x in w)
        except TypeError:
            pass
        arr = np.array([float(x) for x in w])
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("direction must be a nonempty vector")
        norm = np.linalg.norm(arr)
        if norm == 0:
            raise ParameterError("direction must be nonzero")
        if not normalize and abs(norm - 1) > 1e-12:
            raise ParameterError("direction is not a unit vector")
        self.w = arr / norm
        self.w.setflags(write=False)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "HiddenDirection":
        return cls(rng.standard_normal(n))

    @classmethod
    def basis_vector(cls, n: int, i: int = 0) -> "HiddenDirection":
        return cls([int(j == i) for j in range(n)])

    @property
    def n(self) -> int:
        return self.w.size

    def precise(self, prec: int = DEFAULT_PREC) -> list:
        """The direction normalised at ``prec`` bits from its exact (or float) entries."""
        return _precise_unit(self._exact if self._exact is not None else tuple(self.w), prec)

    def __repr__(self):
        return f"HiddenDirection({np.array2string(self.w, precision=4)})"


@functools.lru_cache(maxsize=128)
def _precise_unit(entries: tuple, prec: int) -> list:
    ctx = context(prec)
    v = [to_mpf(ctx, x) for x in entries]
    norm = ctx.sqrt(ctx.fsum(x * x for x in v))
    return [x / norm for x in v]


class HiddenSubspace:
    """``n x m`` matrix ``W`` with orthonormal columns (``0 <= m <= n``)."""

    def __init__(self, W, tol: float = 1e-10):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[1] > W.shape[0]:
            raise ParameterError("W must be n x m with m <= n")
        if W.shape[1] and np.max(np.abs(W.T @ W - np.eye(W.shape[1]))) > tol:
            raise ParameterError("columns of W are not orthonormal")
        self.W = W.copy()
        self.W.setflags(write=False)

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "HiddenSubspace":
        if m == 0:
            return cls(np.zeros((n, 0)))
        q, r = np.linalg.qr(rng.standard_normal((n, m)))
        return cls(q * np.sign(np.diag(r)))

    @classmethod
    def coordinate(cls, n: int, m: int) -> "HiddenSubspace":
        return cls(np.eye(n)[:, :m])

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class SampleBatch:
    """Immutable structure-of-arrays batch: ``y`` has shape ``(N, n)``; ``z`` is optional.

    ``fidelity`` is ``"float64"`` or ``"precise"`` (object arrays of mpmath numbers).
    """

    y: np.ndarray
    z: np.ndarray | None = None
    fidelity: str = "float64"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.fidelity not in ("float64", "precise"):
            raise ParameterError(f"unknown fidelity {self.fidelity!r}")
        y = np.array(self.y, dtype=float if self.fidelity == "float64" else object)
        if y.ndim == 1:
            y = y.reshape(1, -1)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.z is not None:
            z = np.array(self.z, dtype=float if self.fidelity == "float64" else object).ravel()
            if z.size != y.shape[0]:
                raise ParameterError("y and z lengths differ")
            z.setflags(write=False)
            object.__setattr__(self, "z", z)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def has_z(self) -> bool:
        return self.z is not None

    def as_float(self) -> "SampleBatch":
        if self.fidelity == "float64":
            return self
        y = np.vectorize(float, otypes=[float])(self.y)
        z = None if self.z is None else np.vectorize(float, otypes=[float])(self.z)
        return SampleBatch(y, z, "float64", self.meta)

    def replace(self, **changes) -> "SampleBatch":
        fields = {"y": self.y, "z": self.z, "fidelity": self.fidelity, "meta": self.meta}
        fields.update(changes)
        return SampleBatch(**fields)

    def projection(self, v) -> np.ndarray:
        return self.as_float().y @ np.asarray(v, dtype=float)


def _meta(generator: str, params: ClweParams | None = None, **extra) -> dict:
    meta = {"generator": generator}
    if params is not None:
        meta.update(n=params.n, beta=params.beta, gamma=params.gamma)
    meta.update(extra)
    return meta


def gaussian(n: int, size: int, rng: np.random.Generator, width: float = 1.0) -> np.ndarray:
    """``size`` draws from ``D_{R^n, width}`` as an ``(size, n)`` array."""
    return rng.standard_normal((size, n)) * width_to_std(width)


def _precise_uniform(ctx, rng: np.random.Generator, count: int):
    words = -(-ctx.prec // 64) + 1
    raw = rng.integers(0, 2**64, size=(count, words), dtype=np.uint64)
    scale = ctx.mpf(2) ** (-64 * words)
    out = []
    for row in raw:
        acc = 0
        for x in row:
            acc = (acc << 64) | int(x)
        out.append(ctx.mpf(acc) * scale)
    return out


def precise_gaussian(n: int, size: int, rng: np.random.Generator, prec: int, width=1):
    """``D_{R^n, width}`` draws with every entry a full-precision mpmath number (Box-Muller)."""
    ctx = context(prec)
    count = n * size
    u1 = _precise_uniform(ctx, rng, count)
    u2 = _precise_uniform(ctx, rng, count)
    w = to_mpf(ctx, width)
    vals = [w * ctx.sqrt(-ctx.log(1 - a) / ctx.pi) * ctx.cos(2 * ctx.pi * b) for a, b in zip(u1, u2)]
    out = np.empty((size, n), dtype=object)
    for k, v in enumerate(vals):
        out[k // n, k % n] = v
    return out


def sample_clwe(
    params: ClweParams,
    w: HiddenDirection,
    rng: np.random.Generator,
    size: int = 1,
    fidelity: str = "float64",
    prec: int = DEFAULT_PREC,
) -> SampleBatch:
    """CLWE samples ``(y, (gamma <y,w> + e) mod 1)`` with ``y ~ D_{R^n}``, ``e ~ D_{R,beta}``."""
    if w.n != params.n:
        raise ParameterError("direction dimension does not match n")
    if fidelity == "float64":
        y = gaussian(params.n, size, rng)
        e = rng.standard_normal(size) * width_to_std(params.beta) if params.beta > 0 else 0.0
        z = np.mod(params.gamma * (y @ w.w) + e, 1.0)
        z[z >= 1.0] = 0.0
        return SampleBatch(y, z, "float64", _meta("clwe", params, size=size))
    if fidelity != "precise":
        raise ParameterError(f"unknown fidelity {fidelity!r}")
    ctx = context(prec)
    y = precise_gaussian(params.n, size, rng, prec)
    wp = w.precise(prec)
    g = to_mpf(ctx, params.gamma)
    e = precise_gaussian(1, size, rng, prec, params.beta)[:, 0] if params.beta > 0 else [ctx.zero] * size
    z = np.empty(size, dtype=object)
    for i in range(size):
        v = g * ctx.fsum(a * b for a, b in zip(y[i], wp)) + e[i]
        z[i] = v - ctx.floor(v)
    return SampleBatch(y, z, "precise", _meta("clwe", params, size=size, prec=prec))


def _hidden_coordinates(params: ClweParams, rng: np.random.Generator, shape) -> np.ndarray:
    if params.beta <= 0:
        raise ParameterError("beta must be > 0; use sample_hclwe_noiseless for beta = 0")
    table = integer_gaussian_table(params.mixture_width)
    j = table.sample(rng, shape)
    noise = rng.standard_normal(shape) * width_to_std(params.component_width)
    return params.layer_spacing * j + noise


def _embed(y: np.ndarray, W: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Replace the components of ``y`` along the columns of ``W`` by ``t``."""
    if W.shape[1] == 0:
        return y
    return y - (y @ W) @ W.T + t @ W.T


def sample_hclwe(params: ClweParams, w: HiddenDirection, rng: np.random.Generator, size: int = 1) -> SampleBatch:
    """Homogeneous CLWE via its mixture form: layers at ``gamma k/(beta^2+gamma^2)``."""
    if w.n != params.n:
        raise ParameterError("direction dimension does not match n")
    t = _hidden_coordinates(params, rng, (size, 1))
    y = _embed(gaussian(params.n, size, rng), w.w.reshape(-1, 1), t)
    return SampleBatch(y, None, "float64", _meta("hclwe", params, size=size))


def sample_hclwe_noiseless(gamma: float, w: HiddenDirection, rng: np.random.Generator, size: int = 1) -> SampleBatch:
    """Noiseless hCLWE: ``<y,w> ~ D_{(1/gamma) Z}`` (width 1), Gaussian elsewhere."""
    if gamma <= 0:
        raise ParameterError("gamma must be > 0")
    j = integer_gaussian_table(float(gamma)).sample(rng, (size, 1))
    y = _embed(gaussian(w.n, size, rng), w.w.reshape(-1, 1), j / gamma)
    params = ClweParams(w.n, 0.0, gamma)
    return SampleBatch(y, None, "float64", _meta("hclwe-noiseless", params, size=size))


def sample_hclwe_m(params: ClweParams, W: HiddenSubspace, rng: np.random.Generator, size: int = 1) -> SampleBatch:
    """m-direction hCLWE; ``m = 0`` is exactly ``D_{R^n}``."""
    if not isinstance(W, HiddenSubspace):
        W = HiddenSubspace(W)
    if W.n != params.n:
        raise ParameterError("subspace dimension does not match n")
    y = gaussian(params.n, size, rng)
    if W.m:
        y = _embed(y, W.W, _hidden_coordinates(params, rng, (size, W.m)))
    return SampleBatch(y, None, "float64", _meta("hclwe-m", params, size=size, m=W.m))


def sample_null_clwe(n: int, rng: np.random.Generator, size: int = 1) -> SampleBatch:
    y = gaussian(n, size, rng)
    z = rng.random(size)
    return SampleBatch(y, z, "float64", {"generator": "null-clwe", "n": n, "size": size})


def sample_null_gaussian(n: int, rng: np.random.Generator, size: int = 1) -> SampleBatch:
    return SampleBatch(gaussian(n, size, rng), None, "float64", {"generator": "null-gaussian", "n": n, "size": size})


# ---------------------------------------------------------------------------
# Densities


@functools.lru_cache(maxsize=256)
def hclwe_normalizer(beta: float, gamma: float) -> float:
    """``Z = beta/sqrt(beta^2+gamma^2) * rho_{sqrt(beta^2+gamma^2)}(Z)`` via the theta oracle."""
    width = math.hypot(beta, gamma)
    mass = gaussian_mass(Lattice([[1]]), width, 1e-15).mass
    return float(beta / width * mass)


def _side_tail(d: np.ndarray, beta: float) -> np.ndarray:
    """Bound on ``sum_{j>=0} rho_beta(d + j)`` for ``d > 0``."""
    q = np.exp(-np.pi * (2 * d + 1) / beta**2)
    return np.exp(-np.pi * d * d / beta**2) / (1 - q)


def density_ratio(t, beta: float, gamma: float, k_trunc: int | None = None) -> np.ndarray:
    """``a(t) = (1/Z) sum_k rho_beta(gamma t - k)``, the hCLWE/Gaussian ratio along ``w``.

    With ``k_trunc=None`` the sum runs over a window around ``gamma t`` wide
    enough that omitted terms are below ``1e-12`` of the sum.  With an explicit
    ``k_trunc`` only ``|k| <= k_trunc`` is used and a too-small value raises.
    """
    if beta <= 0:
        raise ParameterError("beta must be > 0")
    t = np.asarray(t, dtype=float)
    u = gamma * t.ravel()
    if k_trunc is None:
        # The nearest term is >= exp(-pi/(4 beta^2)); stop where terms fall 1e-13 below it.
        half = max(1, math.ceil(beta * math.sqrt(math.log(1e13) / math.pi + 1 / (4 * beta * beta))) + 1)
        ks = np.rint(u)[:, None] + np.arange(-half, half + 1)[None, :]
    else:
        ks = np.broadcast_to(np.arange(-k_trunc, k_trunc + 1, dtype=float), (u.size, 2 * k_trunc + 1))
    total = np.exp(-np.pi * (u[:, None] - ks) ** 2 / beta**2).sum(axis=1)
    if k_trunc is not None:
        hi = k_trunc + 1 - u
        lo = k_trunc + 1 + u
        tail = np.where(hi > 0, _side_tail(np.maximum(hi, 1e-300), beta), np.inf)
        tail = tail + np.where(lo > 0, _side_tail(np.maximum(lo, 1e-300), beta), np.inf)
        if np.any(tail > DENSITY_REL_TOL * total):
            raise ParameterError(f"k_trunc={k_trunc} leaves omitted terms above {DENSITY_REL_TOL:g} of the sum")
    return (total / hclwe_normalizer(beta, gamma)).reshape(t.shape)


def hclwe_density(y, params: ClweParams, w: HiddenDirection, k_trunc: int | None = None) -> np.ndarray:
    """Normalised hCLWE density ``rho(y) a(<y, w>)`` at each row of ``y``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != params.n:
        raise ParameterError("point dimension does not match n")
    t = y @ w.w
    return np.exp(-np.pi * np.sum(y * y, axis=1)) * density_ratio(t, params.beta, params.gamma, k_trunc)


def gaussian_density(y) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return np.exp(-np.pi * np.sum(y * y, axis=1))


def hclwe_marginal_pdf(t, beta: float, gamma: float) -> np.ndarray:
    """Density of ``<y, w>`` under hCLWE."""
    t = np.asarray(t, dtype=float)
    return np.exp(-np.pi * t * t) * density_ratio(t, beta, gamma)


@dataclass(frozen=True)
class TruncatedMixture:
    """Central ``2k+1`` layers of the hCLWE mixture, renormalised (1-D, along ``w``).

    ``widths`` are rho-widths of the components; ``tv_bound`` is
    ``2 exp(-pi k^2/(beta^2+gamma^2))``.
    """

    k: int
    weights: np.ndarray
    means: np.ndarray
    widths: np.ndarray
    tv_bound: float

    @property
    def stds(self) -> np.ndarray:
        return width_to_std(self.widths)

    def pdf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        sd = self.stds
        comp = np.exp(-0.5 * ((t - self.means) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        return comp @ self.weights

    def sample(self, rng: np.random.Generator, size: int, w: HiddenDirection | None = None) -> np.ndarray:
        """Hidden coordinates, or full vectors along ``w`` when a direction is given."""
        idx = rng.choice(self.weights.size, size=size, p=self.weights)
        t = self.means[idx] + rng.standard_normal(size) * self.stds[idx]
        if w is None:
            return t
        return _embed(gaussian(w.n, size, rng), w.w.reshape(-1, 1), t.reshape(-1, 1))


def mixture_components(beta: float, gamma: float, k: int):
    """Unnormalised weights ``rho_{sqrt(beta^2+gamma^2)}(j)``, means and widths for ``|j| <= k``."""
    s2 = beta * beta + gamma * gamma
    j = np.arange(-k, k + 1, dtype=float)
    weights = np.exp(-np.pi * j * j / s2)
    means = gamma * j / s2
    widths = np.full(j.size, beta / math.sqrt(s2))
    return weights, means, widths


def truncate_hclwe(params: ClweParams, k: int) -> TruncatedMixture:
    if k < 0 or int(k) != k:
        raise ParameterError("k must be a nonnegative integer")
    if params.beta <= 0:
        raise ParameterError("beta must be > 0")
    weights, means, widths = mixture_components(params.beta, params.gamma, int(k))
    s2 = params.beta**2 + params.gamma**2
    return TruncatedMixture(
        k=int(k),
        weights=weights / weights.sum(),
        means=means,
        widths=widths,
        tv_bound=2 * math.exp(-math.pi * k * k / s2),
    )
