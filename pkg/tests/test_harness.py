import json
import math

import numpy as np
import pytest

from clwelab import distributions as dist
from clwelab.distributions import ClweParams, HiddenDirection, SampleBatch
from clwelab.harness import io, plotdata
from clwelab.harness.experiments import ConfigError, ExperimentConfig, TrialReport, run_experiment
from clwelab.harness.rng import make_rng, trial_rngs
from clwelab.harness.stats import (
    AdvantageEstimate,
    bonferroni,
    chi_square_counts,
    chi_square_uniform,
    estimate_advantage,
    ks_two_sample,
    wilson_interval,
)


def test_rng_streams_reproducible_and_distinct():
    a = make_rng(5, "exp", 3).random(4)
    b = make_rng(5, "exp", 3).random(4)
    c = make_rng(5, "exp", 4).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert not np.array_equal(make_rng(6, "exp", 3).random(4), a)
    r = trial_rngs(5, "exp", 5)
    assert np.array_equal(r[3].random(4), a)
    with pytest.raises(ValueError):
        make_rng(0, -1)


def test_ks_identical():
    a = np.arange(200.0)
    res = ks_two_sample(a, a)
    assert res.statistic == 0 and res.p_value == 1 and res.passed
    with pytest.raises(ValueError):
        ks_two_sample(a[:50], a)


def test_ks_calibration_and_power():
    passes = 0
    for k in range(100):
        rng = make_rng(31, "ks-cal", k)
        passes += ks_two_sample(rng.standard_normal(10_000), rng.standard_normal(10_000)).passed
    assert passes >= 99
    rng = make_rng(31, "ks-power")
    assert ks_two_sample(rng.standard_normal(10_000), rng.standard_normal(10_000) + 0.5).p_value < 1e-6


def test_chi_square_uniform_cases():
    grid = (np.arange(64_000) + 0.5) / 64_000
    assert chi_square_uniform(grid).p_value == pytest.approx(1.0)
    passes = sum(chi_square_uniform(make_rng(32, "chi", k).random(100_000)).passed for k in range(100))
    assert passes >= 99
    rng = make_rng(32, "chi-power")
    z = dist.sample_clwe(ClweParams(2, 0.0, 0.2), HiddenDirection([1, 0]), rng, 100_000).z
    assert not chi_square_uniform(z).passed
    with pytest.raises(ValueError):
        chi_square_uniform([1.0])


def test_chi_square_counts_pools_sparse_cells():
    res = chi_square_counts([50, 50, 0, 0], [0.5, 0.5, 1e-9, 1e-9])
    assert res.passed


def test_bonferroni_and_wilson():
    assert bonferroni(1e-3, 4) == 2.5e-4
    lo, hi = wilson_interval(20, 20)
    assert hi == pytest.approx(1.0) and 0.83 < lo < 0.84
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_advantage_calibration():
    rngf = lambda label, k: make_rng(33, label, k)  # noqa: E731
    const = estimate_advantage(lambda b: True, lambda r: "pos", lambda r: "null", 20, rngf)
    assert const.advantage == 0 and const.advantage_ci[0] == 0
    perfect = estimate_advantage(lambda b: b == "pos", lambda r: "pos", lambda r: "null", 20, rngf)
    assert perfect.advantage == 1
    assert perfect.advantage_ci[1] == 1
    with pytest.raises(ValueError):
        estimate_advantage(lambda b: True, lambda r: 0, lambda r: 0, 5, rngf)


def test_null_vs_null_constant_distinguisher():
    est = AdvantageEstimate(40, 17, 19)
    lo, hi = est.advantage_ci
    assert lo <= 0 + 1e-12 <= hi or lo == 0


def test_csv_round_trip_float(tmp_path):
    b = dist.sample_clwe(ClweParams(3, 0.1, 2.0), HiddenDirection([1, 2, 2]), make_rng(0, "io"), 50)
    path = io.write_batch(b, tmp_path / "b.csv", seed=7)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("n,beta,gamma,seed,generator")
    assert lines[2] == "y1,y2,y3,z"
    back = io.read_batch(path)
    assert np.array_equal(back.y, b.y) and np.array_equal(back.z, b.z)
    assert back.meta["seed"] == 7 and back.meta["gamma"] == 2.0


def test_csv_round_trip_precise(tmp_path):
    b = dist.sample_clwe(ClweParams(2, 0.0, 4.0), HiddenDirection([3, 4]), make_rng(0, "iop"), 5, "precise", 256)
    back = io.read_batch(io.write_batch(b, tmp_path / "p.csv"))
    assert back.fidelity == "precise"
    for u, v in zip(back.z, b.z):
        assert abs(u - v) < 1e-75


def test_binary_round_trip(tmp_path):
    b = dist.sample_hclwe(ClweParams(4, 0.1, 2.0), HiddenDirection.random(4, make_rng(1, "w")), make_rng(1, "b"), 1000)
    path = io.write_batch(b, tmp_path / "b.bin")
    assert path.read_bytes()[:4] == io.MAGIC
    back = io.read_batch(path)
    assert np.array_equal(back.y, b.y) and back.z is None
    assert back.meta["generator"] == "hclwe"
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(ValueError):
        io.read_batch(bad)


def test_provenance_record():
    a = SampleBatch(np.zeros((2, 2)))
    b = SampleBatch(np.ones((2, 2)))
    rec = io.provenance("rescale", a, b, {"beta": 0.1}, {"accepted": 2})
    assert rec["input_batch"] == io.batch_id(a) != rec["output_batch"]
    assert set(rec) == {"operation", "input_batch", "output_batch", "parameters", "acceptance"}


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig("nonsense").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("lll", {"trials": 0}).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("lll", {"bogus": 1}).validate()
    out = tmp_path / "figs"
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig("figures", {"samples": 0}, out=str(out)))
    assert not out.exists()


def test_reports_bit_reproducible():
    cfg = ExperimentConfig.from_dict({"kind": "lll", "n": 3, "gamma": 5.0, "trials": 2, "seed": 4})
    a = io.dumps(run_experiment(cfg).to_dict())
    b = io.dumps(run_experiment(cfg).to_dict())
    assert a == b
    assert "seconds" not in json.loads(a)["outcomes"][0]


def test_figure_files(tmp_path):
    paths = plotdata.emit_all(tmp_path, seed=0)
    for p in paths.values():
        assert p.exists()
    beta, gamma = 0.05, 2.0
    assert plotdata.peak_spacing(paths["fig2_density"]) == pytest.approx(gamma / (beta**2 + gamma**2), rel=0.02)
    assert plotdata.stripe_alignment(paths["fig1_scatter"]) > 0.99
    again = plotdata.emit_all(tmp_path / "again", seed=0)
    for k in paths:
        assert paths[k].read_bytes() == again[k].read_bytes()
