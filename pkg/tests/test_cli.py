import json
import subprocess
import sys

import pytest

from clwelab.harness import io
from clwelab.harness.cli import main


def test_sample_then_reduce_with_provenance(tmp_path):
    src = tmp_path / "clwe.csv"
    assert main(["--seed", "3", "sample", "clwe", "--n", "3", "--count", "2000", "--out", str(src)]) == 0
    b = io.read_batch(src)
    assert b.n == 3 and len(b) == 2000 and b.meta["seed"] == 3
    out = tmp_path / "h.bin"
    assert main(["reduce", "rejection", "--input", str(src), "--delta", "0.2", "--out", str(out), "--seed", "3"]) == 0
    prov = json.loads((tmp_path / "h.bin.provenance.json").read_text())
    assert prov["operation"] == "rejection"
    assert prov["input_batch"] == io.batch_id(b)
    assert prov["output_batch"] == io.batch_id(io.read_batch(out))
    assert 0 < prov["acceptance"]["rate"] < 1


def test_sample_bit_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["sample", "hclwe", "--n", "4", "--count", "500", "--seed", "9", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_rescale_and_hybrid(tmp_path):
    src = tmp_path / "nl.csv"
    assert main(["sample", "hclwe-noiseless", "--n", "2", "--gamma", "2", "--count", "300", "--out", str(src)]) == 0
    assert main(["reduce", "rescale", "--input", str(src), "--beta", "0.2", "--out", str(tmp_path / "r.csv")]) == 0
    prov = json.loads((tmp_path / "r.csv.provenance.json").read_text())
    assert prov["parameters"]["gamma_out"] ** 2 * (1 + 0.01) == pytest.approx(4)
    assert main(["reduce", "hybrid", "--input", str(src), "--m", "3", "--i", "1", "--out", str(tmp_path / "y.csv")]) == 0
    assert io.read_batch(tmp_path / "y.csv").n == 4


def test_analyze_outputs(tmp_path, capsys):
    assert main(["analyze", "sq-corr", "--alpha", "0", "--beta", "0.1", "--gamma", "2"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert abs(float(res["chi"])) < 1e-30
    out = tmp_path / "tv.json"
    assert main(["analyze", "tv", "--beta", "0.03125", "--gamma", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["tv"] > 0.5
    assert main(["analyze", "poisson", "--n", "2"]) == 0
    assert abs(float(json.loads(capsys.readouterr().out)["residual"])) < 1e-12
    basis = tmp_path / "basis.json"
    basis.write_text(json.dumps([["1", "0"], ["0", "2"]]))
    assert main(["analyze", "smoothing", "--basis", str(basis), "--epsilon", "0.01"]) == 0
    assert main(["analyze", "sq-bound", "--gamma", "3", "--beta", "0.5"]) == 0


def test_attack_lll(capsys):
    assert main(["attack", "lll", "--n", "2", "--gamma", "4"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["aggregate"]["recovered"] == 1


def test_attack_covariance_on_file(tmp_path, capsys):
    src = tmp_path / "h.bin"
    assert main(["sample", "hclwe", "--n", "4", "--beta", "0.1", "--gamma", "1", "--count", "100000", "--out", str(src)]) == 0
    assert main(["attack", "covariance", "--input", str(src), "--beta", "0.1", "--gamma", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["decision"] == "hCLWE"


def test_verify_single_criterion(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "--only", "3", "--out", str(out)]) == 0
    assert "[PASS] criterion  3" in capsys.readouterr().out
    assert json.loads(out.read_text())["3"]["passed"] is True


def test_plot_data(tmp_path, capsys):
    assert main(["plot-data", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig2_hclwe_density.csv").exists()


def test_experiment_from_config_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "tv", "gammas": [1.0], "beta": 0.03125, "seed": 1}))
    out = tmp_path / "rep.json"
    assert main(["--config", str(cfg), "experiment", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["aggregate"]["ok"]
    assert (tmp_path / "rep.json.timing.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "lll", "trials": 0}))
    assert main(["experiment", "--config", str(bad)]) == 2
    assert main(["experiment", "--kind", "tv", "--set", "bogus=1"]) == 2
    assert main(["reduce", "rejection"]) == 2
    assert main(["sample", "clwe", "--beta", "-1", "--out", str(tmp_path / "x.csv")]) == 2
    assert not (tmp_path / "x.csv").exists()


def test_failure_exit_code(monkeypatch):
    from clwelab import acceptance

    monkeypatch.setitem(acceptance.CRITERIA, 3, lambda: acceptance.CriterionResult(3, "forced", False, "forced failure"))
    assert main(["verify", "--only", "3"]) == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "clwelab.harness.cli", "analyze", "tv", "--gamma", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and "tv" in res.stdout
    res = subprocess.run([sys.executable, "-m", "clwelab.harness.cli", "sample", "nope"], capture_output=True, text=True)
    assert res.returncode == 2
