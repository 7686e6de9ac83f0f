"""Experiment campaigns shared by the CLI and the acceptance suite.

Each campaign is a pure function of its keyword arguments and a master seed;
trial ``k`` always draws from the stream ``(seed, kind, k)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import distributions as dist
from .. import reductions as red
from .. import solvers as sol
from ..lattice import DiscreteGaussianSpec, Lattice, sample_discrete_gaussian
from ..numerics import discrete_gaussian_second_moment, poisson_residual, width_to_std
from . import plotdata
from .rng import make_rng
from .stats import bonferroni, ks_one_sample, ks_two_sample, wilson_interval, AdvantageEstimate


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


@dataclass
class TrialReport:
    experiment: str
    config: dict
    outcomes: list
    aggregate: dict
    seed: int
    wall_clock: float = 0.0
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Report body; timings live in a sidecar so reruns are byte-identical."""
        return {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "outcomes": self.outcomes,
            "aggregate": self.aggregate,
        }


def _unit_orthogonal(w: np.ndarray, rng) -> np.ndarray:
    v = rng.standard_normal(w.size)
    v -= (v @ w) * w
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Campaigns


def lll_campaign(n: int = 8, gamma: float = 10.0, trials: int = 20, seed: int = 0, spare: int = 2) -> TrialReport:
    """Planted noiseless CLWE instances solved with LLL."""
    params = dist.ClweParams(n, 0.0, gamma)
    prec = max(256, 8 * n * n)
    outcomes, seconds = [], []
    for k in range(trials):
        rng = make_rng(seed, "lll", k)
        t0 = time.perf_counter()
        w = dist.HiddenDirection.random(n, rng)
        batch = dist.sample_clwe(params, w, rng, (n + spare) * (n + 1), "precise", prec)
        rep = sol.solve_noiseless_clwe(batch, gamma)
        seconds.append(time.perf_counter() - t0)
        outcomes.append({
            "trial": k,
            "success": rep.success,
            "recovered": rep.matches(w, 1e-6),
            "max_coord_error": float(min(np.abs(rep.recovered_direction - w.w).max(),
                                         np.abs(rep.recovered_direction + w.w).max())),
            "residual": rep.residual,
        })
    wins = sum(o["recovered"] and o["success"] for o in outcomes)
    agg = {"recovered": wins, "trials": trials}
    timing = {"trial_seconds": seconds, "max_seconds": max(seconds)}
    return TrialReport("lll", {"n": n, "gamma": gamma, "trials": trials, "prec": prec}, outcomes, agg, seed, timing=timing)


def _covariance_of(sampler, m: int, chunk: int = 200_000) -> np.ndarray:
    acc = None
    done = 0
    while done < m:
        k = min(chunk, m - done)
        y = sampler(k)
        part = y.T @ y
        acc = part if acc is None else acc + part
        done += k
    return acc / m


def covariance_campaign(
    n: int = 16, beta: float = 0.1, gamma: float = 1.5, m: int = 200_000, trials: int = 20, seed: int = 0
) -> TrialReport:
    """Covariance test on fresh hCLWE and Gaussian batches."""
    params = dist.ClweParams(n, beta, gamma)
    outcomes = []
    yes = {"hclwe": 0, "null": 0}
    for side in ("hclwe", "null"):
        for k in range(trials):
            rng = make_rng(seed, "covariance", side, k)
            w = dist.HiddenDirection.random(n, rng)
            if side == "hclwe":
                cov = _covariance_of(lambda s: dist.sample_hclwe(params, w, rng, s).y, m)
            else:
                cov = _covariance_of(lambda s: dist.gaussian(n, s, rng), m)
            rep = sol.covariance_report(cov, beta, gamma)
            yes[side] += rep.decision == "hCLWE"
            outcomes.append({
                "side": side,
                "trial": k,
                "decision": rep.decision,
                "max_deviation": rep.max_deviation,
                "alignment": float(abs(rep.extremal_vector @ w.w)),
            })
    adv = AdvantageEstimate(trials, yes["hclwe"], yes["null"])
    agg = dict(adv.to_dict(), threshold=sol.covariance_threshold(beta, gamma))
    cfg = {"n": n, "beta": beta, "gamma": gamma, "m": m, "trials": trials}
    return TrialReport("covariance", cfg, outcomes, agg, seed)


def covariance_gap(gammas=(1.0, 1.5, 2.0), agreement: float = 1e-10) -> TrialReport:
    """Noiseless covariance gap against ``gamma^2 exp(-pi gamma^2)``."""
    outcomes = []
    for g in gammas:
        m2 = discrete_gaussian_second_moment(g, tol=agreement / 4)
        gap = abs(float(m2) - 1 / (2 * math.pi))
        bound = g * g * math.exp(-math.pi * g * g)
        outcomes.append({"gamma": g, "second_moment": float(m2), "gap": gap, "bound": bound, "holds": gap >= bound})
    agg = {"all_hold": all(o["holds"] for o in outcomes)}
    return TrialReport("covariance-gap", {"gammas": list(gammas), "agreement": agreement}, outcomes, agg, 0)


def rejection_experiment(
    beta: float = 0.1, delta: float = 0.1, gamma: float = 2.0, n: int = 2, accepted: int = 50_000, seed: int = 0
) -> TrialReport:
    """CLWE -> hCLWE rejection sampling against a direct hCLWE sampler."""
    rng = make_rng(seed, "rejection")
    params = dist.ClweParams(n, beta, gamma)
    w = dist.HiddenDirection.random(n, rng)
    cfg = red.RejectionConfig(delta)
    out, stats = red.rejection_stream(lambda k: dist.sample_clwe(params, w, rng, k), cfg, rng, accepted)
    target = dist.ClweParams(n, math.hypot(beta, delta), gamma)
    direct = dist.sample_hclwe(target, w, make_rng(seed, "rejection", "direct"), accepted)
    u = _unit_orthogonal(w.w, rng)
    alpha = bonferroni(1e-3, 2)
    tests = {
        "hidden": ks_two_sample(out.y @ w.w, direct.y @ w.w, alpha).to_dict(),
        "orthogonal": ks_two_sample(out.y @ u, direct.y @ u, alpha).to_dict(),
    }
    lo99, hi99 = wilson_interval(stats["accepted"], stats["attempts"], 0.99)
    agg = {
        "attempts": stats["attempts"],
        "accepted": stats["accepted"],
        "rate": stats["rate"],
        "wilson99": [lo99, hi99],
        "rate_floor": delta / 4,
        "rate_ok": lo99 >= delta / 4,
        "ks": tests,
        "ks_ok": all(t["passed"] for t in tests.values()),
    }
    cfgd = {"beta": beta, "delta": delta, "gamma": gamma, "n": n, "accepted": accepted}
    return TrialReport("rejection", cfgd, [], agg, seed)


def default_bdd_setup(beta_target: float = 0.5, gamma_target: float = 2.0, q: float = 4.0):
    """``L = (1/2) Z^2`` with ``r``, ``s1``, ``s2`` and ``||w||`` chosen around the targets."""
    L = Lattice([["1/2", 0], [0, "1/2"]])
    r = 5.0
    s1 = r / (math.sqrt(2) * q)
    s2 = beta_target / math.sqrt(2)
    wnorm = gamma_target / (math.sqrt(2) * r)
    params = red.BddTransformParams(r, s1, s2, math.exp(-2))
    return L, params, wnorm


def bdd_experiment(samples: int = 50_000, seed: int = 0, bins: int = 4) -> TrialReport:
    """BDD -> CLWE samples against a direct CLWE sampler with the implied parameters."""
    L, params, wnorm = default_bdd_setup()
    rng = make_rng(seed, "bdd")
    d = rng.standard_normal(2)
    d /= np.linalg.norm(d)
    inst = red.BddInstance(L, (2, -4), tuple(wnorm * d))
    x = sample_discrete_gaussian(DiscreteGaussianSpec(L, params.r), rng, samples)
    out = red.bdd_to_clwe(inst, params, x, rng)
    cp = dist.ClweParams(2, out.meta["beta"], out.meta["gamma"])
    w = dist.HiddenDirection(d)
    direct = dist.sample_clwe(cp, w, make_rng(seed, "bdd", "direct"), samples)

    def residual(b):
        r_ = np.mod(b.z - cp.gamma * (b.y @ w.w) + 0.5, 1.0) - 0.5
        return r_

    ra, rb = residual(out), residual(direct)
    pa, pb = out.y @ w.w, direct.y @ w.w
    edges = np.quantile(pb, np.linspace(0, 1, bins + 1)[1:-1])
    ntests = 2 + bins
    alpha = bonferroni(1e-3, ntests)
    tests = {"projection": ks_two_sample(pa, pb, alpha).to_dict(), "residual": ks_two_sample(ra, rb, alpha).to_dict()}
    ia, ib = np.digitize(pa, edges), np.digitize(pb, edges)
    for b in range(bins):
        tests[f"residual_bin{b}"] = ks_two_sample(ra[ia == b], rb[ib == b], alpha).to_dict()
    cov = sol.sample_covariance(out)
    sd = (1 / (2 * math.pi)) * math.sqrt(2 / samples)
    cov_z = float(np.max(np.abs(cov - np.eye(2) / (2 * math.pi))) / sd)
    agg = {
        "beta": cp.beta,
        "gamma": cp.gamma,
        "eta": out.meta["eta"],
        "precondition": out.meta["precondition"],
        "ks": tests,
        "ks_ok": all(t["passed"] for t in tests.values()),
        "covariance_max_z": cov_z,
        "covariance_ok": cov_z <= 4,
    }
    cfgd = {"r": params.r, "s1": params.s1, "s2": params.s2, "epsilon": params.epsilon, "wnorm": wnorm, "samples": samples}
    return TrialReport("bdd2clwe", cfgd, [], agg, seed)


def random_basis(n: int, rng, min_det: float = 0.25) -> np.ndarray:
    """Entries uniform in [-2, 2], redrawn until ``|det| >= min_det``."""
    while True:
        B = rng.uniform(-2, 2, (n, n))
        if abs(np.linalg.det(B)) >= min_det:
            return B


def poisson_campaign(per_dim: int = 100, dims=(1, 2, 3), widths=(1.0, 2.0), tol: float = 1e-12, seed: int = 0) -> TrialReport:
    outcomes = []
    for n in dims:
        rng = make_rng(seed, "poisson", n)
        for k in range(per_dim):
            L = Lattice(random_basis(n, rng))
            for s in widths:
                outcomes.append({"n": n, "trial": k, "s": s, "residual": float(poisson_residual(L, s, tol))})
    worst = max(o["residual"] for o in outcomes)
    agg = {"worst_residual": worst, "limit": 2 * tol, "ok": worst <= 2 * tol, "count": len(outcomes)}
    return TrialReport("poisson", {"per_dim": per_dim, "dims": list(dims), "widths": list(widths), "tol": tol}, outcomes, agg, seed)


SQ_GRID = {
    "alpha": (0.0, 0.3, 1 / math.sqrt(2), 1.0),
    "gamma": (1.5, 2.0, 3.0),
    "beta": (0.1, 0.3),
}


def sq_grid_campaign(N: int = 1_000_000, seed: int = 0, grid=None) -> TrialReport:
    grid = grid or SQ_GRID
    outcomes = []
    for a in grid["alpha"]:
        for g in grid["gamma"]:
            for b in grid["beta"]:
                cf = sol.sq_corr_closed_form(sol.SqCorrParams(a, b, g))
                rng = make_rng(seed, "sq", f"{a:.6f}-{g}-{b}")
                w = np.array([1.0, 0.0])
                v = np.array([a, math.sqrt(max(1 - a * a, 0.0))])
                est, se = sol.sq_corr_monte_carlo(v, w, b, g, N, rng)
                chi = float(cf.chi)
                if a == 1:
                    bound_ok = chi + 1 <= cf.bound
                else:
                    bound_ok = abs(chi) <= cf.bound
                outcomes.append({
                    "alpha": a, "gamma": g, "beta": b,
                    "closed_form": chi, "monte_carlo": est, "std_error": se,
                    "z": (est - chi) / se if se > 0 else 0.0,
                    "agree": abs(est - chi) <= 3 * se,
                    "bound": cf.bound, "bound_kind": cf.bound_kind, "bound_ok": bool(bound_ok),
                })
    agg = {
        "agree": sum(o["agree"] for o in outcomes),
        "bounds_ok": sum(o["bound_ok"] for o in outcomes),
        "points": len(outcomes),
    }
    return TrialReport("sq-corr", {"N": N}, outcomes, agg, seed)


def tv_campaign(beta: float = 1 / 32, gammas=(1.0, 2.0, 4.0), tol: float = 1e-8) -> TrialReport:
    outcomes = []
    for g in gammas:
        est = sol.hclwe_tv_lower_estimate(beta, g, tol=tol)
        outcomes.append({"beta": beta, "gamma": g, "tv": est.value, "step": est.step, "halvings": est.halvings})
    agg = {"min_tv": min(o["tv"] for o in outcomes), "ok": all(o["tv"] > 0.5 for o in outcomes)}
    return TrialReport("tv", {"beta": beta, "gammas": list(gammas), "tol": tol}, outcomes, agg, 0)


def truncation_campaign(pairs=((0.1, 2.0), (0.3, 3.0)), ks=(1, 2, 3, 4, 5), tol: float = 1e-8) -> TrialReport:
    outcomes = []
    for b, g in pairs:
        for k in ks:
            est = sol.truncation_tv(b, g, k, tol=tol)
            bound = dist.truncate_hclwe(dist.ClweParams(1, b, g), k).tv_bound
            outcomes.append({"beta": b, "gamma": g, "k": k, "tv": est.value, "bound": bound, "ok": est.value <= bound})
    agg = {"ok": all(o["ok"] for o in outcomes)}
    return TrialReport("truncation", {"pairs": [list(p) for p in pairs], "ks": list(ks)}, outcomes, agg, 0)


def hybrid_campaign(
    n: int = 8, m: int = 2, beta: float = 0.1, gamma: float = 1.0, samples: int = 100_000, trials: int = 20, seed: int = 0
) -> TrialReport:
    """Top hybrid (``i = m-1`` on hCLWE input) and the ``m = 0`` null path."""
    params = dist.ClweParams(n, beta, gamma)
    n_in = n - m + 1
    outcomes = []
    for k in range(trials):
        rng = make_rng(seed, "hybrid", k)
        w = dist.HiddenDirection.random(n_in, rng)
        src = dist.sample_hclwe(dist.ClweParams(n_in, beta, gamma), w, rng, samples)
        out, R = red.embed_hybrid(src, m - 1, m, params, rng)
        rep = sol.covariance_distinguisher(out, beta, gamma)
        null = dist.sample_hclwe_m(params, dist.HiddenSubspace.random(n, 0, rng), rng, samples)
        nrep = sol.covariance_distinguisher(null, beta, gamma)
        u = rng.standard_normal(n)
        u /= np.linalg.norm(u)
        std = width_to_std(1.0)
        normal = ks_one_sample(null.y @ u, lambda t: _normal_cdf(t, std))
        cov = sol.sample_covariance(null)
        sd = (1 / (2 * math.pi)) * math.sqrt(1 / samples)
        off = cov - np.diag(np.diag(cov))
        outcomes.append({
            "trial": k,
            "displaced": rep.displaced,
            "null_displaced": nrep.displaced,
            "null_normal_p": normal.p_value,
            "null_offdiag_max_z": float(np.max(np.abs(off)) / sd),
        })
    agg = {
        "exact_m": sum(o["displaced"] == m for o in outcomes),
        "null_clean": sum(o["null_displaced"] == 0 for o in outcomes),
        "null_normal_ok": sum(o["null_normal_p"] > 1e-3 for o in outcomes),
        "null_offdiag_ok": sum(o["null_offdiag_max_z"] <= 4 for o in outcomes),
        "threshold": sol.covariance_threshold(beta, gamma),
        "trials": trials,
    }
    cfgd = {"n": n, "m": m, "beta": beta, "gamma": gamma, "samples": samples, "trials": trials}
    return TrialReport("hybrid", cfgd, outcomes, agg, seed)


def _normal_cdf(t, std):
    from scipy.special import ndtr

    return ndtr(np.asarray(t) / std)


def figures_experiment(out_dir, seed: int = 0, beta: float = 0.05, gamma: float = 2.0, samples: int = 4000) -> TrialReport:
    paths = plotdata.emit_all(out_dir, seed=seed, beta=beta, gamma=gamma, samples=samples)
    spacing = plotdata.peak_spacing(paths["fig2_density"])
    expected = gamma / (beta**2 + gamma**2)
    agg = {
        "files": {k: str(v) for k, v in paths.items()},
        "peak_spacing": spacing,
        "expected_spacing": expected,
        "relative_error": abs(spacing - expected) / expected,
        "ok": abs(spacing - expected) <= 0.02 * expected,
    }
    return TrialReport("figures", {"beta": beta, "gamma": gamma, "samples": samples}, [], agg, seed)


# ---------------------------------------------------------------------------
# Configuration


CAMPAIGNS = {
    "lll": lll_campaign,
    "covariance": covariance_campaign,
    "covariance-gap": covariance_gap,
    "rejection": rejection_experiment,
    "bdd2clwe": bdd_experiment,
    "poisson": poisson_campaign,
    "sq-corr": sq_grid_campaign,
    "tv": tv_campaign,
    "truncation": truncation_campaign,
    "hybrid": hybrid_campaign,
    "figures": figures_experiment,
}


@dataclass
class ExperimentConfig:
    kind: str
    options: dict = field(default_factory=dict)
    seed: int = 0
    precision_bits: int = 256
    out: str | None = None

    def validate(self) -> None:
        import inspect

        if self.kind not in CAMPAIGNS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {sorted(CAMPAIGNS)}")
        if self.precision_bits < 64:
            raise ConfigError("precision_bits must be >= 64")
        fn = CAMPAIGNS[self.kind]
        sig = inspect.signature(fn)
        unknown = set(self.options) - set(sig.parameters)
        if unknown:
            raise ConfigError(f"unknown options for {self.kind}: {sorted(unknown)}")
        for key in ("trials", "samples", "m", "accepted", "N", "per_dim"):
            if key in self.options and int(self.options[key]) <= 0:
                raise ConfigError(f"{key} must be positive, got {self.options[key]}")
        if self.kind == "figures" and not self.out:
            raise ConfigError("figures experiment needs an output directory")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind is None:
            raise ConfigError("config needs a 'kind'")
        known = {"seed", "precision_bits", "out", "options"}
        options = dict(data.pop("options", {}))
        options.update({k: v for k, v in data.items() if k not in known})
        return cls(kind, options, int(data.get("seed", 0)), int(data.get("precision_bits", 256)), data.get("out"))


def run_experiment(cfg: ExperimentConfig) -> TrialReport:
    cfg.validate()
    fn = CAMPAIGNS[cfg.kind]
    kwargs = dict(cfg.options)
    t0 = time.perf_counter()
    if cfg.kind == "figures":
        report = fn(Path(cfg.out), seed=cfg.seed, **kwargs)
    elif "seed" in fn.__code__.co_varnames:
        report = fn(seed=cfg.seed, **kwargs)
    else:
        report = fn(**kwargs)
    report.wall_clock = time.perf_counter() - t0
    return report
