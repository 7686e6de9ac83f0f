"""Acceptance criteria, each run at its stated parameters and tolerance.

Every ``criterion_*`` function returns a :class:`CriterionResult`; ``run_all``
prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field

from .harness import experiments as ex
from .harness import plotdata


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:>2}: {self.title} -- {self.summary}"


def criterion_1(seed: int = 0, trials: int = 20) -> CriterionResult:
    """Noiseless LLL solver: n=8, gamma=10, >= 18/20 recoveries, < 60 s per trial; n=2 smoke < 1 s."""
    smoke = ex.lll_campaign(n=2, gamma=4.0, trials=1, seed=seed)
    big = ex.lll_campaign(n=8, gamma=10.0, trials=trials, seed=seed)
    a = big.aggregate
    ok = (
        a["recovered"] >= math.ceil(0.9 * trials)
        and big.timing["max_seconds"] < 60
        and smoke.aggregate["recovered"] == 1
        and smoke.timing["max_seconds"] < 1
    )
    summary = (
        f"n=8: {a['recovered']}/{trials} recovered, slowest trial {big.timing['max_seconds']:.1f}s; "
        f"n=2 smoke {smoke.timing['max_seconds']:.3f}s"
    )
    return CriterionResult(1, "LLL solves noiseless CLWE", ok, summary, {"n8": big.to_dict(), "n2": smoke.to_dict(), "timing": {"n8": big.timing, "n2": smoke.timing}})


def criterion_2(seed: int = 0, trials: int = 20, m: int = 200_000) -> CriterionResult:
    """Covariance distinguisher at n=16, gamma=1.5, beta=0.1: advantage >= 0.8."""
    rep = ex.covariance_campaign(n=16, beta=0.1, gamma=1.5, m=m, trials=trials, seed=seed)
    a = rep.aggregate
    lo, hi = a["advantage_ci"]
    ok = a["advantage"] >= 0.8
    summary = (
        f"m={m}: advantage {a['advantage']:.2f} (95% CI [{lo:.2f}, {hi:.2f}]), "
        f"hCLWE rate {a['rate_pos']:.2f}, null false-alarm rate {a['rate_null']:.2f}, threshold {a['threshold']:.3g}"
    )
    return CriterionResult(2, "covariance distinguisher advantage", ok, summary, rep.to_dict())


def criterion_3() -> CriterionResult:
    rep = ex.covariance_gap((1.0, 1.5, 2.0), agreement=1e-10)
    parts = ", ".join(f"g={o['gamma']}: {o['gap']:.3e} >= {o['bound']:.3e}" for o in rep.outcomes)
    return CriterionResult(3, "noiseless covariance gap", rep.aggregate["all_hold"], parts, rep.to_dict())


def criterion_4(seed: int = 0) -> CriterionResult:
    rep = ex.rejection_experiment(beta=0.1, delta=0.1, gamma=2.0, n=2, accepted=50_000, seed=seed)
    a = rep.aggregate
    ok = a["rate_ok"] and a["ks_ok"]
    summary = (
        f"acceptance {a['rate']:.4f} (99% Wilson low {a['wilson99'][0]:.4f} vs {a['rate_floor']}); "
        f"KS p hidden {a['ks']['hidden']['p_value']:.3g}, orthogonal {a['ks']['orthogonal']['p_value']:.3g}"
    )
    return CriterionResult(4, "rejection reduction CLWE -> hCLWE", ok, summary, rep.to_dict())


def criterion_5(seed: int = 0) -> CriterionResult:
    rep = ex.bdd_experiment(samples=50_000, seed=seed)
    a = rep.aggregate
    ok = a["ks_ok"] and a["precondition"] >= a["eta"]
    pmin = min(t["p_value"] for t in a["ks"].values())
    summary = (
        f"precondition {a['precondition']:.3f} >= eta {a['eta']:.3f}; output beta={a['beta']:.3f}, "
        f"gamma={a['gamma']:.3f}; min KS p {pmin:.3g} over {len(a['ks'])} tests"
    )
    return CriterionResult(5, "BDD -> CLWE sample transform", ok, summary, rep.to_dict())


def criterion_6(seed: int = 0, per_dim: int = 100) -> CriterionResult:
    rep = ex.poisson_campaign(per_dim=per_dim, dims=(1, 2, 3), widths=(1.0, 2.0), tol=1e-12, seed=seed)
    a = rep.aggregate
    summary = f"worst residual {a['worst_residual']:.3e} <= {a['limit']:.0e} over {a['count']} evaluations"
    return CriterionResult(6, "Poisson summation residual", a["ok"], summary, rep.to_dict())


def criterion_7(seed: int = 0, N: int = 1_000_000) -> CriterionResult:
    rep = ex.sq_grid_campaign(N=N, seed=seed)
    a = rep.aggregate
    ok = a["agree"] == a["points"] and a["bounds_ok"] == a["points"]
    worst = max(abs(o["z"]) for o in rep.outcomes)
    summary = f"{a['agree']}/{a['points']} within 3 SE (max |z| {worst:.2f}); bounds hold at {a['bounds_ok']}/{a['points']}"
    return CriterionResult(7, "SQ pairwise correlation", ok, summary, rep.to_dict())


def criterion_8() -> CriterionResult:
    rep = ex.tv_campaign(1 / 32, (1.0, 2.0, 4.0), tol=1e-8)
    parts = ", ".join(f"g={o['gamma']}: {o['tv']:.4f}" for o in rep.outcomes)
    return CriterionResult(8, "TV(hCLWE, Gaussian) > 1/2", rep.aggregate["ok"], parts, rep.to_dict())


def criterion_9() -> CriterionResult:
    rep = ex.truncation_campaign(((0.1, 2.0), (0.3, 3.0)), (1, 2, 3, 4, 5), tol=1e-8)
    slack = min(o["bound"] - o["tv"] for o in rep.outcomes)
    summary = f"{sum(o['ok'] for o in rep.outcomes)}/{len(rep.outcomes)} grid points within bound (min slack {slack:.3e})"
    return CriterionResult(9, "truncated mixture TV bound", rep.aggregate["ok"], summary, rep.to_dict())


def criterion_10(seed: int = 0, trials: int = 20) -> CriterionResult:
    rep = ex.hybrid_campaign(n=8, m=2, beta=0.1, gamma=1.0, samples=100_000, trials=trials, seed=seed)
    a = rep.aggregate
    need = math.ceil(0.95 * trials)
    ok = (
        a["exact_m"] >= need
        and a["null_clean"] >= need
        and a["null_normal_ok"] >= need
        and a["null_offdiag_ok"] >= need
    )
    summary = (
        f"exactly 2 displaced: {a['exact_m']}/{trials}; m=0 null: clean spectrum {a['null_clean']}/{trials}, "
        f"normality {a['null_normal_ok']}/{trials}, isotropy {a['null_offdiag_ok']}/{trials}"
    )
    return CriterionResult(10, "hybrid embedding spectrum", ok, summary, rep.to_dict())


def criterion_11(seed: int = 0, out_dir=None) -> CriterionResult:
    tmp = None
    if out_dir is None:
        tmp = tempfile.TemporaryDirectory()
        out_dir = tmp.name
    try:
        rep = ex.figures_experiment(out_dir, seed=seed)
        align = plotdata.stripe_alignment(rep.aggregate["files"]["fig1_scatter"])
    finally:
        if tmp is not None:
            tmp.cleanup()
    a = rep.aggregate
    ok = a["ok"] and align > 0.99
    summary = (
        f"peak spacing {a['peak_spacing']:.4f} vs {a['expected_spacing']:.4f} "
        f"(rel. err {a['relative_error']:.2%}); fig1 stripe normal alignment {align:.3f}"
    )
    return CriterionResult(11, "figure plot-data", ok, summary, dict(rep.to_dict(), stripe_alignment=align))


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_all(only=None, echo=print) -> list[CriterionResult]:
    results = []
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        t0 = time.perf_counter()
        res = fn()
        res.detail["seconds"] = time.perf_counter() - t0
        echo(res.line())
        results.append(res)
    return results
