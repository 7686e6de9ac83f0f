"""Statistical tests and advantage estimation."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

DEFAULT_SIGNIFICANCE = 1e-3


@dataclass(frozen=True)
class StatTestResult:
    test: str
    statistic: float
    p_value: float
    n: int
    significance: float = DEFAULT_SIGNIFICANCE

    @property
    def passed(self) -> bool:
        return self.p_value > self.significance

    def to_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


def bonferroni(significance: float, tests: int) -> float:
    return significance / max(tests, 1)


def ks_two_sample(a, b, significance: float = DEFAULT_SIGNIFICANCE) -> StatTestResult:
    """Two-sided two-sample KS test with the asymptotic p-value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 100 or b.size < 100:
        raise ValueError("KS test needs at least 100 samples per side")
    res = stats.ks_2samp(a, b, method="asymp")
    return StatTestResult("ks2", float(res.statistic), float(res.pvalue), int(min(a.size, b.size)), significance)


def ks_one_sample(a, cdf: Callable, significance: float = DEFAULT_SIGNIFICANCE) -> StatTestResult:
    a = np.asarray(a, dtype=float).ravel()
    res = stats.kstest(a, cdf, method="asymp")
    return StatTestResult("ks1", float(res.statistic), float(res.pvalue), a.size, significance)


def chi_square_counts(observed, expected_probs, significance: float = DEFAULT_SIGNIFICANCE, min_expected: float = 5.0):
    """Pearson chi-square of counts against probabilities; sparse cells are pooled."""
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    p = p / p.sum()
    total = obs.sum()
    exp = p * total
    order = np.argsort(exp)
    o_cells, e_cells = [], []
    acc_o = acc_e = 0.0
    for i in order:
        acc_o += obs[i]
        acc_e += exp[i]
        if acc_e >= min_expected:
            o_cells.append(acc_o)
            e_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and e_cells:
        o_cells[-1] += acc_o
        e_cells[-1] += acc_e
    if len(e_cells) < 2:
        return StatTestResult("chi2", 0.0, 1.0, int(total), significance)
    res = stats.chisquare(o_cells, e_cells)
    return StatTestResult("chi2", float(res.statistic), float(res.pvalue), int(total), significance)


def chi_square_uniform(values, bins: int = 64, significance: float = DEFAULT_SIGNIFICANCE) -> StatTestResult:
    v = np.asarray(values, dtype=float).ravel()
    if np.any((v < 0) | (v >= 1)):
        raise ValueError("values must lie in [0, 1)")
    counts = np.bincount(np.minimum((v * bins).astype(int), bins - 1), minlength=bins)
    res = stats.chisquare(counts)
    return StatTestResult("chi2-uniform", float(res.statistic), float(res.pvalue), v.size, significance)


def normal_mean_z(values, mean: float, std: float) -> float:
    """z-score of the sample mean of ``values`` against a known mean and std."""
    v = np.asarray(values, dtype=float).ravel()
    return float((v.mean() - mean) / (std / np.sqrt(v.size)))


def variance_z(values, var: float) -> float:
    """z-score of the sample variance against ``var`` for Gaussian data."""
    v = np.asarray(values, dtype=float).ravel()
    return float((v.var() - var) / (var * np.sqrt(2.0 / (v.size - 1))))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class AdvantageEstimate:
    trials: int
    yes_pos: int
    yes_null: int
    confidence: float = 0.95

    @property
    def rate_pos(self) -> float:
        return self.yes_pos / self.trials

    @property
    def rate_null(self) -> float:
        return self.yes_null / self.trials

    @property
    def advantage(self) -> float:
        return abs(self.rate_pos - self.rate_null)

    @property
    def ci_pos(self):
        return wilson_interval(self.yes_pos, self.trials, self.confidence)

    @property
    def ci_null(self):
        return wilson_interval(self.yes_null, self.trials, self.confidence)

    @property
    def advantage_ci(self) -> tuple[float, float]:
        """Conservative interval from the two Wilson intervals."""
        (pl, ph), (nl, nh) = self.ci_pos, self.ci_null
        lo = max(pl - nh, nl - ph, 0.0)
        hi = max(ph - nl, nh - pl)
        return lo, min(hi, 1.0)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "yes_pos": self.yes_pos,
            "yes_null": self.yes_null,
            "rate_pos": self.rate_pos,
            "rate_null": self.rate_null,
            "advantage": self.advantage,
            "advantage_ci": list(self.advantage_ci),
            "ci_pos": list(self.ci_pos),
            "ci_null": list(self.ci_null),
        }


def estimate_advantage(distinguisher: Callable, source_pos: Callable, source_null: Callable, trials: int, rng_for: Callable):
    """Run ``distinguisher`` (returns True for YES) on fresh batches from each source.

    ``rng_for(label, k)`` supplies the generator for trial ``k`` of side ``label``.
    """
    if trials < 20:
        raise ValueError("trials must be >= 20")
    yes_pos = sum(bool(distinguisher(source_pos(rng_for("pos", k)))) for k in range(trials))
    yes_null = sum(bool(distinguisher(source_null(rng_for("null", k)))) for k in range(trials))
    return AdvantageEstimate(trials, yes_pos, yes_null)
