import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deeprand.distill import (
    ad_decode,
    ad_encode,
    ad_rates,
    advantage_distill,
    binary_entropy,
    distill_chain,
    estimate_bsc,
    majority,
    pack_bits,
    privacy_amplify,
    reconcile,
    secure_length_estimate,
    simulate_ad,
    unpack_bits,
)


def _bsc(a, eps, rng):
    return a ^ (rng.random(a.size) < eps).astype(np.uint8)


@given(st.lists(st.integers(0, 1), max_size=70))
def test_pack_roundtrip(bits):
    arr = np.array(bits, dtype=np.uint8)
    assert np.array_equal(unpack_bits(pack_bits(arr)), arr)


def test_unpack_rejects_bad_length():
    with pytest.raises(ValueError):
        unpack_bits({"bits": 20, "hex": "ff"})


def test_estimate_bsc(rng):
    a = rng.integers(0, 2, 50000, dtype=np.uint8)
    est = estimate_bsc(a, _bsc(a, 0.1, rng))
    assert abs(est.epsilon - 0.1) < 4 * est.stderr


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)


def test_encode_decode():
    a = np.array([1, 0, 1], dtype=np.uint8)
    m = ad_encode(1, a)
    assert ad_decode(m, a) == (True, 1)
    assert ad_decode(m, np.array([1, 1, 1], dtype=np.uint8)) == (False, None)
    assert ad_decode(m, a ^ 1) == (True, 0)


def test_ad_rates_closed_form():
    r = ad_rates(0.1, 0.25, 3)
    acc = 0.9 ** 3 + 0.1 ** 3
    assert r.accept == pytest.approx(acc)
    assert r.err_b == pytest.approx(0.1 ** 3 / acc)
    assert r.err_e == pytest.approx(0.25 ** 3 / (0.25 ** 3 + 0.75 ** 3))
    with pytest.raises(ValueError):
        ad_rates(1.5, 0.1, 3)


@pytest.mark.parametrize("L", [1, 3, 5])
def test_simulation_matches_closed_form(L):
    r = ad_rates(0.15, 0.3, L)
    sim = simulate_ad(0.15, 0.3, L, 40000, np.random.default_rng(L))
    sd = math.sqrt(r.accept * (1 - r.accept) / sim.trials)
    assert abs(sim.accept - r.accept) <= 4 * sd


def test_majority_ties_are_fair():
    words = np.tile(np.array([[1, 0]], dtype=np.uint8), (4000, 1))
    out = majority(words, np.random.default_rng(0))
    assert abs(out.mean() - 0.5) < 0.05
    assert majority(np.array([[1, 1, 0]], dtype=np.uint8), None).tolist() == [1]


def test_advantage_distill_reduces_error(rng):
    a = rng.integers(0, 2, 30000, dtype=np.uint8)
    b = _bsc(a, 0.1, rng)
    res = advantage_distill(a, b, 3, rng)
    err = np.mean(res.key_a != res.key_b)
    assert err < ad_rates(0.1, 0.1, 3).err_b * 2
    assert res.accept_rate == pytest.approx(ad_rates(0.1, 0.1, 3).accept, abs=0.02)


def test_reconcile_residual(rng):
    a = rng.integers(0, 2, 4096, dtype=np.uint8)
    b = _bsc(a, 0.02, rng)
    res = reconcile(a, b, 16, 2, rng)
    assert res.residual_rate < 1e-3
    assert res.leaked_bits >= 2 * 4096 // 16
    assert np.sum(a != b) >= res.corrections - res.residual_mismatches


def test_reconcile_validation(rng):
    with pytest.raises(ValueError):
        reconcile([0, 1], [0, 1], 1, 1, rng)


def test_privacy_amplify_is_linear_and_seeded():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 200, dtype=np.uint8)
    y = rng.integers(0, 2, 200, dtype=np.uint8)
    hx, hy, hxy = (privacy_amplify(v, 11, 32) for v in (x, y, x ^ y))
    assert np.array_equal(hx ^ hy, hxy)
    assert not np.array_equal(privacy_amplify(x, 12, 32), hx)
    with pytest.raises(ValueError):
        privacy_amplify(x, 1, 201)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_amplified_bits_look_balanced(seed):
    x = np.random.default_rng(seed).integers(0, 2, 512, dtype=np.uint8)
    out = privacy_amplify(x, seed, 256)
    assert 80 < out.sum() < 176


def test_secure_length_estimate():
    assert secure_length_estimate(1000, 0.5, 100) == 900
    assert secure_length_estimate(1000, 0.0, 0) == 0


def test_distill_chain_end_to_end(rng):
    a = rng.integers(0, 2, 25000, dtype=np.uint8)
    b = _bsc(a, 0.1, rng)
    eve = {"e": _bsc(a, 0.3, rng)}
    rep = distill_chain(a, b, 3, 16, 4, 64, 5, eve)
    assert rep.keys_match and rep.key_len == 64
    assert rep.residual_rate < 1e-3
    assert rep.err_e["e"] > rep.err_b
    again = distill_chain(a, b, 3, 16, 4, 64, 5, eve)
    assert rep.to_json() == again.to_json()


def test_relative_advantage_grows_with_L():
    ratios = [ad_rates(0.1, 0.25, L).err_e / ad_rates(0.1, 0.25, L).err_b for L in (1, 3, 5, 7)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
