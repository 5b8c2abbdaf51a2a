import json

import pytest

from deeprand.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_no_command(capsys):
    assert _run(capsys)[0] == 1


def test_bad_flag(capsys):
    code, _, err = _run(capsys, "distill", "--nope")
    assert code == 1 and "usage" in err


def test_check_degradation(capsys):
    code, out, _ = _run(capsys, "check-degradation", "--n", "2", "--k", "2", "--grid", "9")
    assert code == 0
    assert json.loads(out)["ratio"] == pytest.approx(15.760523854069223, rel=1e-10)


def test_check_degradation_limits(capsys):
    assert _run(capsys, "check-degradation", "--n", "6")[0] == 1


def test_check_indist(capsys):
    code, out, _ = _run(capsys, "check-indist", "--alpha", "1")
    assert code == 0 and json.loads(out)["pass"]


def test_drg_audit_roundtrip(capsys, tmp_path):
    state = tmp_path / "s.json"
    code, out, _ = _run(capsys, "drg-audit", "--steps", "3", "--seed", "4", "--save-state", str(state))
    assert code == 0 and json.loads(out)["pass"]
    code, out2, _ = _run(capsys, "drg-audit", "--state", str(state))
    assert code == 0 and json.loads(out2) == json.loads(out)


def test_drg_audit_missing_state(capsys, tmp_path):
    assert _run(capsys, "drg-audit", "--state", str(tmp_path / "missing.json"))[0] == 1
    assert _run(capsys, "drg-audit")[0] == 1


def test_distill_synthetic(capsys, tmp_path):
    out_file = tmp_path / "d.json"
    code, _, _ = _run(capsys, "distill", "--length", "6000", "--out-len", "32", "--out", str(out_file))
    doc = json.loads(out_file.read_text())
    assert code == 0 and doc["key_len"] == 32 and doc["keys_match"]


def test_simulate_with_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"protocol": {"n": 12, "k": 2.0, "dispersion_samples": 64}, "calibration_runs": 10}))
    code, out, _ = _run(capsys, "simulate", "--config", str(cfg), "--runs", "30", "--csv", str(tmp_path / "t.csv"))
    assert code == 0
    assert json.loads(out)["runs"] == 30
    assert (tmp_path / "t.csv").read_text().startswith("strategy,")


def test_bad_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert _run(capsys, "pipeline", "--config", str(cfg))[0] == 1
