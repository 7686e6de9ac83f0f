"""Sample transformations between the CLWE family and from lattice problems."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import (
    ClweParams,
    HiddenDirection,
    SampleBatch,
    _hidden_coordinates,
    gaussian,
)
from .lattice import Lattice, smoothing_parameter, to_mpf
from .numerics import DEFAULT_PREC, ParameterError, context, width_to_std

G0_TERMS = 8


class AcceptanceStarvation(RuntimeError):
    """Rejection sampling used up its attempt budget."""


def random_rotation(n: int, rng: np.random.Generator, prec: int | None = None):
    """Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).

    With ``prec`` the float draw is re-orthonormalised at that precision and an
    mpmath matrix is returned.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if prec is None:
        return q
    ctx = context(prec)
    cols = []
    for j in range(n):
        v = [ctx.mpf(float(q[i, j])) for i in range(n)]
        for u in cols:
            d = ctx.fsum(a * b for a, b in zip(v, u))
            v = [a - d * b for a, b in zip(v, u)]
        norm = ctx.sqrt(ctx.fsum(a * a for a in v))
        cols.append([a / norm for a in v])
    R = ctx.matrix(n, n)
    for j, col in enumerate(cols):
        for i in range(n):
            R[i, j] = col[i]
    return R


def worst_to_average(batch: SampleBatch, rng: np.random.Generator, R=None):
    """Rotate every ``y`` by a random ``R`` (keeps ``z``); returns ``(batch, R)``.

    If the input used direction ``w``, the output uses ``R w``; callers map a
    recovered direction back with ``R^T``.
    """
    if batch.fidelity == "precise":
        prec = int(batch.meta.get("prec", DEFAULT_PREC))
        if R is None:
            R = random_rotation(batch.n, rng, prec)
        ctx = context(prec)
        y = np.empty(batch.y.shape, dtype=object)
        for k, row in enumerate(batch.y):
            for i in range(batch.n):
                y[k, i] = ctx.fsum(R[i, j] * row[j] for j in range(batch.n))
    else:
        if R is None:
            R = random_rotation(batch.n, rng)
        y = batch.y @ np.asarray(R).T
    meta = dict(batch.meta, rotated=True)
    return batch.replace(y=y, meta=meta), R


# ---------------------------------------------------------------------------
# CLWE -> homogeneous CLWE


@dataclass(frozen=True)
class RejectionConfig:
    delta: float
    max_attempts_per_sample: int = 1000

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")
        if self.max_attempts_per_sample < 1:
            raise ParameterError("max_attempts_per_sample must be >= 1")

    @property
    def sup(self) -> float:
        """``M = g0(0)``."""
        return float(g0(0.0, self.delta))

    @property
    def null_acceptance(self) -> float:
        """Acceptance probability when ``z`` is uniform: ``delta / M``."""
        return self.delta / self.sup


def g0(z, delta: float) -> np.ndarray:
    """``sum_k rho_delta(z + k)`` truncated at ``|k| <= 8``.

    For ``delta < 1`` and ``z`` in ``[0, 1)`` the omitted terms are below
    ``2 exp(-49 pi) < 1e-60``.
    """
    z = np.asarray(z, dtype=float)
    k = np.arange(-G0_TERMS, G0_TERMS + 1)
    return np.exp(-np.pi * ((z[..., None] + k) / delta) ** 2).sum(axis=-1)


def _output_params(batch: SampleBatch, delta: float) -> dict:
    meta = {"generator": "rejection", "delta": delta}
    if "beta" in batch.meta:
        meta.update(
            n=batch.meta["n"],
            beta=math.hypot(batch.meta["beta"], delta),
            gamma=batch.meta["gamma"],
            source_beta=batch.meta["beta"],
        )
    return meta


def clwe_to_hclwe_rejection(batch: SampleBatch, cfg: RejectionConfig, rng: np.random.Generator):
    """Keep each ``y`` with probability ``g0(z)/M``; returns ``(accepted, stats)``."""
    if not batch.has_z:
        raise ParameterError("rejection sampling needs (y, z) samples")
    fb = batch.as_float()
    accept = rng.random(len(fb)) < g0(fb.z, cfg.delta) / cfg.sup
    stats = {"attempts": len(fb), "accepted": int(accept.sum())}
    stats["rate"] = stats["accepted"] / max(stats["attempts"], 1)
    out = SampleBatch(fb.y[accept], None, "float64", dict(_output_params(batch, cfg.delta), size=stats["accepted"]))
    return out, stats


def rejection_stream(
    source: Callable[[int], SampleBatch],
    cfg: RejectionConfig,
    rng: np.random.Generator,
    count: int,
    chunk: int = 20_000,
):
    """Draw from ``source(k)`` until ``count`` samples are accepted.

    Raises :class:`AcceptanceStarvation` once attempts exceed
    ``max_attempts_per_sample * count``.
    """
    kept, attempts, accepted = [], 0, 0
    budget = cfg.max_attempts_per_sample * count
    meta = None
    while accepted < count:
        if attempts >= budget:
            raise AcceptanceStarvation(f"{accepted}/{count} accepted after {attempts} attempts")
        src = source(min(chunk, budget - attempts))
        out, stats = clwe_to_hclwe_rejection(src, cfg, rng)
        meta = out.meta
        attempts += stats["attempts"]
        accepted += stats["accepted"]
        kept.append(out.y)
    y = np.concatenate(kept)[:count]
    stats = {"attempts": attempts, "accepted": accepted, "rate": accepted / attempts}
    return SampleBatch(y, None, "float64", dict(meta, size=count)), stats


# ---------------------------------------------------------------------------
# Noiseless hCLWE -> noisy hCLWE


def rescaled_params(beta: float, gamma: float):
    """``(beta~, gamma~)`` after adding ``beta/gamma`` noise and rescaling."""
    g = gamma / math.sqrt(1 + (beta / gamma) ** 2)
    return g * beta / gamma, g


def add_noise_rescale(batch: SampleBatch, beta: float, rng: np.random.Generator):
    """Add ``D_{R^n, beta/gamma}`` noise, rescale by ``gamma/sqrt(beta^2+gamma^2)``.

    Returns ``(batch, beta~, gamma~)``.
    """
    if beta <= 0:
        raise ParameterError("beta must be > 0")
    gamma = float(batch.meta["gamma"])
    fb = batch.as_float()
    noisy = fb.y + gaussian(fb.n, len(fb), rng, beta / gamma)
    y = noisy * (gamma / math.hypot(beta, gamma))
    bt, gt = rescaled_params(beta, gamma)
    meta = dict(batch.meta, generator="noise-rescale", beta=bt, gamma=gt, source_gamma=gamma)
    return SampleBatch(y, None, "float64", meta), bt, gt


# ---------------------------------------------------------------------------
# BDD -> CLWE


@dataclass(frozen=True)
class BddTransformParams:
    r: float
    s1: float
    s2: float
    epsilon: float

    def __post_init__(self):
        if min(self.r, self.s1, self.s2) <= 0:
            raise ParameterError("widths must be positive")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")

    @property
    def t(self) -> float:
        return math.hypot(self.r, self.s1)

    @property
    def r_prime(self) -> float:
        return self.r**2 / self.t

    @property
    def s1_prime(self) -> float:
        return self.r * self.s1 / self.t

    def gamma_out(self, wnorm: float) -> float:
        return wnorm * self.r**2 / self.t

    def beta_out(self, wnorm: float) -> float:
        return math.sqrt((wnorm * self.s1_prime) ** 2 + self.s2**2)

    def precondition_value(self, wnorm: float) -> float:
        rs = self.r * self.s1
        return rs / math.sqrt(wnorm**2 * (rs / self.s2) ** 2 + self.t**2)


@dataclass(frozen=True)
class BddInstance:
    """Target ``u + offset`` with ``u`` in the dual of ``lattice``."""

    lattice: Lattice
    u: tuple
    offset: tuple

    def __post_init__(self):
        n = self.lattice.n
        if len(self.u) != n or len(self.offset) != n:
            raise ParameterError("dimension mismatch")
        if not self.lattice.dual().contains(self.u):
            raise ParameterError("u is not in the dual lattice")

    @property
    def target(self) -> tuple:
        return tuple(a + b for a, b in zip(self.u, self.offset))

    @property
    def offset_norm(self) -> float:
        return math.sqrt(sum(float(x) ** 2 for x in self.offset))


def check_bdd_precondition(instance: BddInstance, params: BddTransformParams) -> dict:
    eta = smoothing_parameter(instance.lattice, params.epsilon)
    value = params.precondition_value(instance.offset_norm)
    return {"eta": eta, "value": value, "ok": value >= eta}


def bdd_to_clwe(
    instance: BddInstance,
    params: BddTransformParams,
    dgs_samples: np.ndarray,
    rng: np.random.Generator,
    prec: int = DEFAULT_PREC,
) -> SampleBatch:
    """Turn ``D_{L,r}`` samples into CLWE samples for direction ``offset/||offset||``.

    ``<x, target> mod 1`` is computed at ``prec`` bits; since ``u`` is in the
    dual it equals ``<x, offset> mod 1``.  Refuses to run when the smoothing
    precondition fails.
    """
    check = check_bdd_precondition(instance, params)
    if not check["ok"]:
        raise ParameterError(
            f"smoothing precondition fails: {check['value']:.6g} < eta = {check['eta']:.6g}"
        )
    ctx = context(prec)
    x = np.asarray(dgs_samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != instance.lattice.n:
        raise ParameterError("samples must be an (N, n) array")
    size, n = x.shape
    v = gaussian(n, size, rng, params.s1)
    e = rng.standard_normal(size) * width_to_std(params.s2)
    target = [to_mpf(ctx, a) for a in instance.target]
    z = np.empty(size)
    for i in range(size):
        ip = ctx.fsum(ctx.mpf(float(a)) * b for a, b in zip(x[i], target)) + ctx.mpf(float(e[i]))
        z[i] = float(ip - ctx.floor(ip))
    z[z >= 1.0] = 0.0
    y = (x + v) / params.t
    wn = instance.offset_norm
    meta = {
        "generator": "bdd2clwe",
        "n": n,
        "beta": params.beta_out(wn),
        "gamma": params.gamma_out(wn),
        "direction": [float(a) / wn for a in instance.offset] if wn > 0 else None,
        "eta": check["eta"],
        "precondition": check["value"],
        "size": size,
    }
    return SampleBatch(y, z, "float64", meta)


def conditional_coset_params(r: float, s: float, y_bar):
    """Centre ``(r/t)^2 y_bar`` and width ``r s / t`` with ``t = sqrt(r^2 + s^2)``."""
    if r <= 0 or s <= 0:
        raise ParameterError("widths must be positive")
    t = math.hypot(r, s)
    centre = (r / t) ** 2 * np.asarray(y_bar, dtype=float)
    return centre, r * s / t


# ---------------------------------------------------------------------------
# Hybrid embedding


def embed_hybrid(batch: SampleBatch, i: int, m: int, params: ClweParams, rng: np.random.Generator, R=None):
    """Append ``i`` hidden hCLWE coordinates and ``m-1-i`` Gaussian ones, then rotate.

    Output dimension is ``n' + m - 1``; returns ``(batch, R)``.  ``params.n``
    is the output dimension.
    """
    if not 0 <= i <= m - 1:
        raise ParameterError("need 0 <= i <= m - 1")
    n_in = batch.n
    if params.n != n_in + m - 1:
        raise ParameterError(f"output dimension {params.n} != {n_in} + {m} - 1")
    fb = batch.as_float()
    size = len(fb)
    hidden = _hidden_coordinates(params, rng, (size, i)) if i else np.zeros((size, 0))
    extra = gaussian(m - 1 - i, size, rng) if m - 1 - i else np.zeros((size, 0))
    y = np.hstack([fb.y, hidden, extra])
    if R is None:
        R = random_rotation(params.n, rng)
    meta = dict(batch.meta, generator="hybrid", n=params.n, beta=params.beta, gamma=params.gamma, i=i, m=m)
    return SampleBatch(y @ R.T, None, "float64", meta), R
