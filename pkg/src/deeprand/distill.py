"""Key distillation: channel estimation, advantage distillation, reconciliation, amplification.

All bit arrays are 1-D ``uint8`` numpy arrays. Bit streams serialize as
packed hexadecimal strings with an explicit bit count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import as_bits
from .rng import stream


def _bits(a, n: int | None = None) -> np.ndarray:
    a = as_bits(np.asarray(a).reshape(-1), n)
    return a


# ---------------------------------------------------------------------------
# serialization


def pack_bits(bits) -> dict:
    bits = _bits(bits)
    return {"bits": int(bits.size), "hex": np.packbits(bits).tobytes().hex()}


def unpack_bits(doc: dict) -> np.ndarray:
    count = int(doc["bits"])
    raw = np.frombuffer(bytes.fromhex(doc["hex"]), dtype=np.uint8)
    if raw.size != (count + 7) // 8:
        raise ValueError("hex payload does not match the declared bit count")
    return np.unpackbits(raw)[:count].astype(np.uint8)


# ---------------------------------------------------------------------------
# channel estimation


@dataclass(frozen=True)
class BscEstimate:
    epsilon: float
    sample_count: int

    @property
    def stderr(self) -> float:
        e = self.epsilon
        return math.sqrt(e * (1 - e) / self.sample_count)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "sample_count": self.sample_count}


def estimate_bsc(a, b) -> BscEstimate:
    a = _bits(a)
    b = _bits(b, a.size)
    if a.size == 0:
        raise ValueError("cannot estimate a channel from zero samples")
    return BscEstimate(float(np.mean(a != b)), int(a.size))


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# ---------------------------------------------------------------------------
# advantage distillation (repetition code)


@dataclass(frozen=True)
class AdParams:
    L: int = 3

    def __post_init__(self):
        if int(self.L) < 1:
            raise ValueError("codeword length L must be >= 1")


def ad_encode(s: int, a) -> np.ndarray:
    """``m_l = a_l XOR s``."""
    if s not in (0, 1):
        raise ValueError("secret bit must be 0 or 1")
    return _bits(a) ^ np.uint8(s)


def ad_decode(m, b):
    """Accept when every ``b_l XOR m_l`` agrees; that common value is the estimate."""
    m = _bits(m)
    b = _bits(b, m.size)
    c = b ^ m
    if np.all(c == c[0]):
        return True, int(c[0])
    return False, None


@dataclass(frozen=True)
class AdRates:
    accept: float
    err_b: float
    err_e: float

    def to_json(self) -> dict:
        return {"accept": self.accept, "err_b": self.err_b, "err_e": self.err_e}


def ad_rates(eps_ab: float, eps_ae: float, L: int) -> AdRates:
    """Closed-form acceptance and post-selection error rates.

    ``err_e`` is the eavesdropper's error on words where its own
    repetition check is unanimous, for a channel independent of B's.
    """
    for e in (eps_ab, eps_ae):
        if not 0 <= e <= 1:
            raise ValueError("error rates must lie in [0, 1]")
    L = AdParams(L).L
    accept = (1 - eps_ab) ** L + eps_ab ** L
    err_b = eps_ab ** L / accept if accept > 0 else 0.5
    den_e = eps_ae ** L + (1 - eps_ae) ** L
    err_e = eps_ae ** L / den_e
    return AdRates(accept, err_b, err_e)


@dataclass
class AdSimulation:
    """Monte Carlo counterpart of :func:`ad_rates` with binomial standard errors."""

    trials: int
    accepted: int
    b_errors: int
    e_unanimous: int
    e_errors: int
    e_majority_errors: int

    @property
    def accept(self) -> float:
        return self.accepted / self.trials

    @property
    def err_b(self) -> float:
        return self.b_errors / self.accepted if self.accepted else float("nan")

    @property
    def err_e(self) -> float:
        return self.e_errors / self.e_unanimous if self.e_unanimous else float("nan")

    @property
    def err_e_majority(self) -> float:
        return self.e_majority_errors / self.accepted if self.accepted else float("nan")


def simulate_ad(eps_ab: float, eps_ae: float, L: int, trials: int, rng) -> AdSimulation:
    """Repetition-code exchange over two independent synthetic BSCs."""
    L = AdParams(L).L
    a = rng.integers(0, 2, size=(trials, L), dtype=np.uint8)
    b = a ^ (rng.random((trials, L)) < eps_ab).astype(np.uint8)
    e = a ^ (rng.random((trials, L)) < eps_ae).astype(np.uint8)
    s = rng.integers(0, 2, size=trials, dtype=np.uint8)
    m = a ^ s[:, None]
    cb = b ^ m
    ce = e ^ m
    acc = np.all(cb == cb[:, :1], axis=1)
    una = np.all(ce == ce[:, :1], axis=1)
    maj = majority(ce, rng)
    return AdSimulation(
        trials,
        int(acc.sum()),
        int(np.sum(cb[acc, 0] != s[acc])),
        int(una.sum()),
        int(np.sum(ce[una, 0] != s[una])),
        int(np.sum(maj[acc] != s[acc])),
    )


def majority(words: np.ndarray, rng) -> np.ndarray:
    """Row-wise majority; exact ties are broken by a fair coin."""
    ones = words.sum(axis=1).astype(np.int64)
    L = words.shape[1]
    out = (2 * ones > L).astype(np.uint8)
    tie = 2 * ones == L
    if np.any(tie):
        out[tie] = rng.integers(0, 2, size=int(tie.sum()), dtype=np.uint8)
    return out


@dataclass
class AdResult:
    """Outcome of advantage distillation on real bit strings."""

    key_a: np.ndarray
    key_b: np.ndarray
    accepted: np.ndarray  # word indices kept
    words: int
    eve_keys: dict = field(default_factory=dict)

    @property
    def accept_rate(self) -> float:
        return self.accepted.size / self.words if self.words else float("nan")


def advantage_distill(a, b, L: int, rng, eve: dict | None = None) -> AdResult:
    """Group bits into words of length ``L`` and run the repetition-code exchange.

    A draws a fresh secret per word and publishes ``m = a XOR s``; B keeps
    words whose XOR with its bits is constant. Each eavesdropper string in
    ``eve`` is majority-decoded on the kept words.
    """
    a = _bits(a)
    b = _bits(b, a.size)
    L = AdParams(L).L
    words = a.size // L
    A = a[: words * L].reshape(words, L)
    B = b[: words * L].reshape(words, L)
    s = rng.integers(0, 2, size=words, dtype=np.uint8)
    m = A ^ s[:, None]
    cb = B ^ m
    acc = np.flatnonzero(np.all(cb == cb[:, :1], axis=1))
    eve_keys = {}
    for name, e in (eve or {}).items():
        E = _bits(e, a.size)[: words * L].reshape(words, L)
        eve_keys[name] = majority((E ^ m)[acc], rng)
    return AdResult(s[acc].copy(), cb[acc, 0].copy(), acc, words, eve_keys)


# ---------------------------------------------------------------------------
# reconciliation


@dataclass
class ReconcileResult:
    corrected: np.ndarray
    leaked_bits: int
    corrections: int
    residual_mismatches: int

    @property
    def residual_rate(self) -> float:
        return self.residual_mismatches / self.corrected.size if self.corrected.size else 0.0


def reconcile(a, b, block: int, passes: int, rng) -> ReconcileResult:
    """Block-parity reconciliation of ``b`` towards ``a``.

    Each pass applies a shared random shuffle, exchanges one parity per
    block and bisects every block with a parity mismatch to locate and flip
    one error. ``leaked_bits`` counts every parity revealed.
    """
    if block < 2:
        raise ValueError("block must be >= 2")
    if passes < 1:
        raise ValueError("passes must be >= 1")
    a = _bits(a)
    fixed = _bits(b, a.size).copy()
    N = a.size
    leaked = corrections = 0
    for _ in range(passes):
        perm = rng.permutation(N)
        for start in range(0, N, block):
            idx = perm[start:start + block]
            leaked += 1
            if (int(a[idx].sum()) - int(fixed[idx].sum())) % 2 == 0:
                continue
            pos, revealed = kernels.bisect_locate(a, fixed, idx.astype(np.int64))
            leaked += revealed
            fixed[pos] ^= 1
            corrections += 1
    return ReconcileResult(fixed, leaked, corrections, int(np.sum(a != fixed)))


# ---------------------------------------------------------------------------
# privacy amplification


def toeplitz_seed(seed: int, length: int) -> np.ndarray:
    return stream(seed, "toeplitz", length).integers(0, 2, size=length, dtype=np.uint8)


def privacy_amplify(bits, seed: int, out_len: int) -> np.ndarray:
    """Multiply by a seed-derived ``out_len x N`` binary Toeplitz matrix over GF(2)."""
    bits = _bits(bits)
    if out_len < 0 or out_len > bits.size:
        raise ValueError(f"out_len must lie in [0, {bits.size}], got {out_len}")
    key = toeplitz_seed(seed, out_len + bits.size - 1) if out_len else np.zeros(0, dtype=np.uint8)
    return kernels.toeplitz_hash(bits, key, out_len)


def secure_length_estimate(n_bits: int, eve_error: float, leaked_bits: int, margin: int = 0) -> int:
    """``n h(e) - leaked - margin``, floored at zero.

    A heuristic count of bits hidden from an eavesdropper with per-bit
    error ``e``; not a leftover-hash-lemma bound.
    """
    return max(0, int(math.floor(n_bits * binary_entropy(eve_error) - leaked_bits - margin)))


@dataclass
class DistillReport:
    accept_rate: float
    err_b: float
    err_e: dict
    leaked_bits: int
    key_len: int
    input_bits: int
    distilled_bits: int
    residual_mismatches: int
    residual_rate: float
    secure_length_estimate: int
    keys_match: bool
    key_a: np.ndarray = field(repr=False, default=None)
    key_b: np.ndarray = field(repr=False, default=None)

    @property
    def length_supported(self) -> bool:
        return self.key_len <= self.secure_length_estimate

    def to_json(self) -> dict:
        return {
            "accept_rate": self.accept_rate,
            "err_b": self.err_b,
            "err_e": dict(self.err_e),
            "leaked_bits": self.leaked_bits,
            "key_len": self.key_len,
            "input_bits": self.input_bits,
            "distilled_bits": self.distilled_bits,
            "residual_mismatches": self.residual_mismatches,
            "residual_rate": self.residual_rate,
            "secure_length_estimate": self.secure_length_estimate,
            "length_supported": self.length_supported,
            "keys_match": self.keys_match,
            "key_a": pack_bits(self.key_a) if self.key_a is not None else None,
        }


def distill_chain(a, b, L: int, block: int, passes: int, out_len: int, seed: int, eve: dict | None = None) -> DistillReport:
    """Advantage distillation, reconciliation and amplification in sequence."""
    ad = advantage_distill(a, b, L, stream(seed, "ad"), eve)
    err_b = float(np.mean(ad.key_a != ad.key_b)) if ad.key_a.size else float("nan")
    err_e = {name: float(np.mean(k != ad.key_a)) if k.size else float("nan") for name, k in ad.eve_keys.items()}
    rec = reconcile(ad.key_a, ad.key_b, block, passes, stream(seed, "reconcile"))
    out = min(out_len, ad.key_a.size)
    key_a = privacy_amplify(ad.key_a, seed, out)
    key_b = privacy_amplify(rec.corrected, seed, out)
    worst = min(err_e.values()) if err_e else 0.5
    return DistillReport(
        accept_rate=ad.accept_rate,
        err_b=err_b,
        err_e=err_e,
        leaked_bits=rec.leaked_bits,
        key_len=int(out),
        input_bits=int(_bits(a).size),
        distilled_bits=int(ad.key_a.size),
        residual_mismatches=rec.residual_mismatches,
        residual_rate=rec.residual_rate,
        secure_length_estimate=secure_length_estimate(ad.key_a.size, worst, rec.leaked_bits),
        keys_match=bool(np.array_equal(key_a, key_b)),
        key_a=key_a,
        key_b=key_b,
    )
