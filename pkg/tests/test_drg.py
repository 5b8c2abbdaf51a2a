import itertools
import json

import numpy as np
import pytest

from deeprand.channel import likelihood, outcome_index, outcomes
from deeprand.core import remoteness
from deeprand.drg import (
    DrgParams,
    DrgState,
    ZetaParams,
    ZetaSamplingError,
    best_response,
    drg_audit,
    drg_next,
    drg_run,
    favorable_terms,
    sample_zeta,
    zeta_compliant,
)
from deeprand.oracle import JointDistribution


def test_sample_zeta_is_compliant(rng):
    params = ZetaParams()
    for n in (2, 3, 4):
        phi = sample_zeta(params, n, rng)
        assert np.all(phi.widths >= params.min_width)
        assert remoteness(phi) >= params.alpha_remote
        assert zeta_compliant(phi, params)


def test_sample_zeta_large_n_uses_bound(rng):
    phi = sample_zeta(ZetaParams(), 128, rng)
    assert phi.n == 128 and zeta_compliant(phi, ZetaParams())


def test_sample_zeta_rejects_n1(rng):
    with pytest.raises(ValueError):
        sample_zeta(ZetaParams(), 1, rng)


def test_unreachable_floor_raises(rng, monkeypatch):
    import deeprand.drg as drg

    monkeypatch.setattr(drg, "MAX_ZETA_TRIES", 5)
    with pytest.raises(ZetaSamplingError):
        sample_zeta(ZetaParams(alpha_remote=0.999), 2, rng)


def test_favorable_terms_dirac_bruteforce():
    x, y, k = np.array([0.9, 0.3]), np.array([0.2, 0.7]), 1.5
    J = JointDistribution.dirac_pair(x, y)
    T = favorable_terms(J, k)
    xs, ys = np.sort(x)[::-1], np.sort(y)[::-1]
    ox, oy = np.argsort(-x, kind="stable"), np.argsort(-y, kind="stable")
    for i, j in itertools.product(outcomes(2), repeat=2):
        p = likelihood(i, x, k) * likelihood(j, y, k)
        va = xs @ j[oy] / 2
        vb = i[ox] @ ys / 2
        a, b = outcome_index(i), outcome_index(j)
        assert T.den[0, a, b] == pytest.approx(p, abs=1e-15)
        assert T.va[0, a, b] == pytest.approx(p * va, abs=1e-15)
        assert T.va2[0, a, b] == pytest.approx(p * va * va, abs=1e-15)
        assert T.vb2[0, a, b] == pytest.approx(p * vb * vb, abs=1e-15)
        assert T.vab[0, a, b] == pytest.approx(p * va * vb, abs=1e-15)
        assert T.target[0, a, b] == pytest.approx(p * xs @ ys / (k * 2), abs=1e-15)


def test_drg_deterministic_and_replayable():
    params = DrgParams()
    a = drg_run(6, params, master_seed=7)
    b = drg_run(6, params, master_seed=7)
    assert a.to_json() == b.to_json()
    assert a.counters == [6, 12]
    restored = DrgState.from_json(json.loads(json.dumps(a.to_json())))
    rep = drg_audit(restored, params)
    assert rep.passed
    assert np.allclose(rep.ratios, a.ratios, rtol=1e-12)
    assert a.entropy_bits > 0


def test_each_step_defeats_previous_best_response():
    params = DrgParams()
    state = DrgState.fresh(3, params)
    for _ in range(4):
        before = best_response(state.history, params)
        J, state = drg_next(state, params)
        assert state.ratios[-1] >= params.alpha_gap
        after = best_response(state.history, params)
        assert not np.allclose(before.values, after.values)


def test_corrupted_state_rejected():
    state = drg_run(2, DrgParams(), 1)
    doc = state.to_json()
    doc["step"] = 5
    with pytest.raises(ValueError):
        DrgState.from_json(doc)


def test_audit_flags_tampered_history():
    params = DrgParams()
    state = drg_run(3, params, 2)
    # replacing an emission by a pair the opponent already handles well
    state.history[2] = JointDistribution.box_pair([0.5, 0.5], [0.5, 0.5], 0.02)
    rep = drg_audit(state, params)
    assert not rep.passed
    assert 2 in rep.shortfalls or 2 in rep.zeta_violations


def test_params_validation():
    with pytest.raises(ValueError):
        DrgParams(alpha_gap=1.0)
    with pytest.raises(ValueError):
        DrgParams(k=0.5)
    assert DrgParams.from_json(DrgParams().to_json()) == DrgParams()
