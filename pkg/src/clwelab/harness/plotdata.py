"""CSV data for the two introductory figures: CLWE and hCLWE scatter plots and the hidden-axis density."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .. import distributions as dist
from .rng import make_rng


def _write(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{float(v):.10g}" for v in r])
    return path


def clwe_scatter(path, seed: int = 0, beta: float = 0.05, gamma: float = 2.0, samples: int = 4000) -> Path:
    """2-D CLWE samples ``y1, y2, z``; colouring by ``z`` shows stripes orthogonal to ``w``."""
    rng = make_rng(seed, "fig1")
    w = dist.HiddenDirection([1, 1])
    b = dist.sample_clwe(dist.ClweParams(2, beta, gamma), w, rng, samples)
    return _write(Path(path), ["y1", "y2", "z"], np.column_stack([b.y, b.z]))


def hclwe_scatter(path, seed: int = 0, beta: float = 0.05, gamma: float = 2.0, samples: int = 4000) -> Path:
    rng = make_rng(seed, "fig2")
    w = dist.HiddenDirection([1, 1])
    b = dist.sample_hclwe(dist.ClweParams(2, beta, gamma), w, rng, samples)
    return _write(Path(path), ["y1", "y2"], b.y)


def hclwe_density_curve(path, beta: float = 0.05, gamma: float = 2.0, lim: float = 2.5, step: float = 1e-3) -> Path:
    """Hidden-axis hCLWE density next to the Gaussian density on a uniform grid."""
    t = np.arange(-lim, lim + step / 2, step)
    h = dist.hclwe_marginal_pdf(t, beta, gamma)
    d = np.exp(-np.pi * t * t)
    return _write(Path(path), ["t", "hclwe", "gaussian"], np.column_stack([t, h, d]))


def emit_all(out_dir, seed: int = 0, beta: float = 0.05, gamma: float = 2.0, samples: int = 4000) -> dict:
    out = Path(out_dir)
    return {
        "fig1_scatter": clwe_scatter(out / "fig1_clwe_scatter.csv", seed, beta, gamma, samples),
        "fig2_scatter": hclwe_scatter(out / "fig2_hclwe_scatter.csv", seed, beta, gamma, samples),
        "fig2_density": hclwe_density_curve(out / "fig2_hclwe_density.csv", beta, gamma),
    }


def read_columns(path) -> dict:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return {h: data[:, i] for i, h in enumerate(header)}


def peak_spacing(path, column: str = "hclwe", min_height: float = 1e-3) -> float:
    """Median gap between local maxima of a density column."""
    cols = read_columns(path)
    t, f = cols["t"], cols[column]
    inner = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:]) & (f[1:-1] > min_height * f.max())
    peaks = t[1:-1][inner]
    if peaks.size < 2:
        return math.nan
    return float(np.median(np.diff(peaks)))


def stripe_alignment(path) -> float:
    """|cos| between ``w = (1,1)/sqrt(2)`` and the direction along which ``z`` varies fastest.

    Fits ``exp(2 pi i z) ~ exp(2 pi i <y, g>)`` by least squares on the phase
    gradient; stripes orthogonal to ``w`` give alignment near 1.
    """
    cols = read_columns(path)
    y = np.column_stack([cols["y1"], cols["y2"]])
    z = cols["z"]
    best, arg = -1.0, None
    for ang in np.linspace(0, np.pi, 361):
        u = np.array([math.cos(ang), math.sin(ang)])
        for scale in np.linspace(0.5, 4.0, 15):
            score = abs(np.mean(np.exp(2j * np.pi * (z - scale * (y @ u)))))
            if score > best:
                best, arg = score, u
    w = np.array([1.0, 1.0]) / math.sqrt(2)
    return float(abs(arg @ w))
