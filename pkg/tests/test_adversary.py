import csv
import io

import numpy as np
import pytest

from deeprand.adversary import (
    CheatingControl,
    InnerProduct,
    OpponentStrategy,
    canonicalize_pair,
    check_roster,
    default_suite,
    enforce_transposition_invariance,
    evaluate_strategies,
    orbit_keys,
    relabel_transcript,
    rg_posterior_strategy,
    strategy_rg_posterior,
    swap_pairs,
)
from deeprand.core import Permutation
from deeprand.oracle import JointDistribution
from deeprand.protocol import ProtocolParams, Transcript, run_instance
from deeprand.rng import stream

PARAMS = ProtocolParams(n=16, k=2.0, dispersion_samples=128, tau=0.1)


@pytest.fixture(scope="module")
def runs():
    return [run_instance(PARAMS, stream(9, "run", r)) for r in range(60)]


def test_canonicalize_pair_orbit():
    assert canonicalize_pair([0, 1, 1], [1, 1, 0]) == ((1, 1), (1, 0), (0, 1))
    assert canonicalize_pair([1, 1, 0], [1, 0, 1]) == canonicalize_pair([0, 1, 1], [1, 1, 0])


def test_orbit_count():
    # multisets of n items over 4 pair types
    assert len(orbit_keys(2)) == 10
    assert len(orbit_keys(3)) == 20


def test_relabel_keeps_tidied_values(runs):
    t = runs[0].transcript
    pi = Permutation.random(16, np.random.default_rng(0))
    r = relabel_transcript(t, pi)
    m, m2 = t.muA[0], r.muA[0]
    assert np.array_equal(m.inverse().apply(t.j), m2.inverse().apply(r.j))


@pytest.mark.parametrize("strategy", default_suite(16, 2.0), ids=lambda s: s.name)
def test_declared_invariance_holds(strategy, runs):
    rng = np.random.default_rng(1)
    for rec in runs[:10]:
        t = rec.transcript
        base = strategy.estimate(t)
        if strategy.invariance in ("transposition", "common_permutation"):
            for sa, sb in ((True, False), (False, True), (True, True)):
                assert strategy.estimate(swap_pairs(t, sa, sb)) == pytest.approx(base, abs=1e-12)
        if strategy.invariance == "common_permutation":
            pi = Permutation.random(16, rng)
            assert strategy.estimate(relabel_transcript(t, pi)) == pytest.approx(base, abs=1e-12)


def test_exact_rg_table_is_orbit_constant():
    s = default_suite(2, 2.0)[-1]
    assert s.name == "rg_posterior_grid_exact"
    swap = Permutation((1, 0))
    for i in ([1, 0], [0, 1], [1, 1]):
        for j in ([1, 0], [0, 1], [0, 0]):
            assert s.table.lookup(i, j) == pytest.approx(s.table.lookup(swap.apply(i), swap.apply(j)), abs=1e-14)


def test_strategy_rg_posterior_symmetrizes():
    J = JointDistribution.box_pair([0.9, 0.1], [0.8, 0.2], 0.1)
    ident = (Permutation.identity(2),) * 2
    a = strategy_rg_posterior(Transcript([1, 0], [1, 0], ident, ident), J, 2.0)
    b = strategy_rg_posterior(Transcript([0, 1], [0, 1], ident, ident), J, 2.0)
    assert a == pytest.approx(b, abs=1e-14)


def test_rg_posterior_strategy_declares_common_permutation():
    s = rg_posterior_strategy("x", JointDistribution.grid_uniform(2, 3), 2.0)
    assert s.invariance == "common_permutation"


def test_transposition_enforcement():
    v = np.random.default_rng(0).random((4, 4, 2, 2))
    out = enforce_transposition_invariance(v)
    assert np.allclose(out[..., 0, 0], out[..., 1, 1])
    v[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        enforce_transposition_invariance(v)


def test_estimate_signature_enforced():
    with pytest.raises(TypeError):

        class Peeking(OpponentStrategy):
            def estimate(self, transcript, record):
                return 0.0


def test_roster_rules():
    s = InnerProduct("a", 2.0)
    with pytest.raises(ValueError):
        check_roster([s, InnerProduct("a", 2.0)])
    with pytest.raises(ValueError):
        check_roster([InnerProduct("B", 2.0)])
    with pytest.raises(TypeError):
        check_roster([object()])


def test_evaluation_table(runs):
    table = evaluate_strategies(default_suite(16, 2.0), runs, 0.1, controls=(CheatingControl(k=2.0),))
    assert list(table.rows)[0] == "B"
    assert "cheating_control" in table.rows
    assert table.runs == 60
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows[0][0] == "strategy" and len(rows) == 1 + len(table.rows)
    for row in table.rows.values():
        assert 0 <= row["bit_error_all"] <= 1


def test_strategies_only_see_transcript(runs):
    class Spy(OpponentStrategy):
        seen = []

        def estimate(self, transcript):
            Spy.seen.append(type(transcript).__name__)
            return 0.0

    evaluate_strategies([Spy("spy")], runs[:3], 0.1)
    assert set(Spy.seen) == {"Transcript"}
