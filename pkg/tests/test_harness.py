import csv
import io
import json

import pytest

from deeprand.harness import ExperimentConfig, canonical_json, emit_report, run_experiment

DOC = {
    "protocol": {"n": 16, "k": 2.0, "dispersion_samples": 128},
    "runs": 240,
    "calibration_runs": 40,
    "chunk": 50,
    "distill": {"L": 1, "block": 8, "passes": 4, "out_len": 8},
}


@pytest.fixture(scope="module")
def report():
    return run_experiment(ExperimentConfig.from_json(DOC))


def test_unknown_keys_rejected():
    with pytest.raises(ValueError):
        ExperimentConfig.from_json({"runz": 3})


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig.from_json({**DOC, "target_error": 2.0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_json({**DOC, "runs": 0})


def test_config_roundtrip():
    cfg = ExperimentConfig.from_json(DOC)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_report_contents(report):
    doc = report.to_json()
    assert doc["runs"] == 240
    assert doc["version"]
    assert "scope" in doc
    assert set(doc["evaluation"]["strategies"]) >= {"B", "inner_product", "cheating_control"}
    json.loads(canonical_json(doc))


def test_deterministic_and_worker_independent(report):
    cfg = ExperimentConfig.from_json({**DOC, "workers": 3})
    a, b = run_experiment(cfg).to_json(), report.to_json()
    a.pop("config")
    b.pop("config")
    assert canonical_json(a) == canonical_json(b)


def test_seed_changes_results(report):
    other = run_experiment(ExperimentConfig.from_json(DOC).with_seed(1))
    assert other.to_json()["evaluation"] != report.to_json()["evaluation"]


def test_strategy_subset():
    cfg = ExperimentConfig.from_json({**DOC, "runs": 20, "strategies": ["inner_product"]})
    rep = run_experiment(cfg, distill=False)
    assert set(rep.evaluation.rows) == {"B", "inner_product", "cheating_control"}
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig.from_json({**DOC, "runs": 20, "strategies": ["nope"]}))


def test_emit(report, tmp_path):
    p = emit_report(report, tmp_path / "r.csv", "csv")
    rows = list(csv.reader(io.StringIO(p.read_text())))
    assert len(rows) == 1 + len(report.evaluation.rows)
    with pytest.raises(ValueError):
        emit_report(report, tmp_path / "r.x", "xml")
