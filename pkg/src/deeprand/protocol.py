"""Two-party protocol: generation, publication, dispersion, synchronization, value.

Each party draws a secret parameter vector from a compliant distribution,
publishes a degraded Bernoulli sample of it, then publishes its tidying
permutation alongside a decoy in random order. Each side picks one of the
other side's two permutations at random; when both picks hit the true
tidying permutations (the favorable case) the two private values agree
in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import as_bits, bernoulli_draw, check_k, degrade_params
from .core import (
    DiscreteDistribution,
    MAX_ENUM_N,
    Permutation,
    all_permutations,
    as_vector,
    tidying_permutation,
)
from .drg import ZetaParams, sample_zeta
from .rng import stream

EXACT_DECOY_N = 6
TIE_RTOL = 1e-12
MAX_PSI_TRIES = 100
MAX_RUN_REGENERATIONS = 1000


class DispersionInfeasible(RuntimeError):
    """No distribution can satisfy the dispersion-mass check for these bits."""


@dataclass(frozen=True)
class ProtocolParams:
    """``n`` coordinates, degradation ``k``, compliant family ``zeta``.

    ``tau`` is the public binarization threshold (``None`` until
    calibrated). ``dispersion_samples`` sets the Monte Carlo size of the
    dispersion-mass check run inside every instance.
    """

    n: int = 128
    k: float = 3.0
    zeta: ZetaParams = field(default_factory=ZetaParams)
    tau: float | None = None
    dispersion_samples: int = 512

    def __post_init__(self):
        if int(self.n) < 2:
            raise ValueError("protocol needs n >= 2")
        if check_k(self.k) <= 1.0:
            raise ValueError("protocol needs k > 1")
        if self.dispersion_samples < 1:
            raise ValueError("dispersion_samples must be positive")

    def with_tau(self, tau: float) -> "ProtocolParams":
        return ProtocolParams(self.n, self.k, self.zeta, float(tau), self.dispersion_samples)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "zeta": self.zeta.to_json(),
            "tau": self.tau,
            "dispersion_samples": self.dispersion_samples,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ProtocolParams":
        return cls(
            int(doc["n"]),
            float(doc["k"]),
            ZetaParams.from_json(doc["zeta"]) if "zeta" in doc else ZetaParams(),
            None if doc.get("tau") is None else float(doc["tau"]),
            int(doc.get("dispersion_samples", 512)),
        )


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def bits_from_str(s: str) -> np.ndarray:
    if any(ch not in "01" for ch in s):
        raise ValueError("bit string must contain only 0 and 1")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


@dataclass(frozen=True, eq=False)
class Transcript:
    """Everything published on the channel, and nothing else."""

    i: np.ndarray
    j: np.ndarray
    muA: tuple
    muB: tuple

    def __post_init__(self):
        i = as_bits(self.i)
        j = as_bits(self.j, i.size)
        for pair in (self.muA, self.muB):
            if len(pair) != 2 or any(p.n != i.size for p in pair):
                raise ValueError("published permutations must be pairs over the same n as the bits")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "muA", tuple(self.muA))
        object.__setattr__(self, "muB", tuple(self.muB))

    @property
    def n(self) -> int:
        return self.i.size

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "i": bits_to_str(self.i),
            "j": bits_to_str(self.j),
            "muA": [p.one_based() for p in self.muA],
            "muB": [p.one_based() for p in self.muB],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Transcript":
        return cls(
            bits_from_str(doc["i"]),
            bits_from_str(doc["j"]),
            tuple(Permutation.from_one_based(p) for p in doc["muA"]),
            tuple(Permutation.from_one_based(p) for p in doc["muB"]),
        )


@dataclass(frozen=True)
class Party:
    """One side's secrets."""

    phi: DiscreteDistribution
    x: np.ndarray
    psi: DiscreteDistribution
    sigma_phi: Permutation
    sigma_d: Permutation
    b: int
    sigma_chosen: Permutation
    psi_regenerations: int
    run_regenerations: int = 0

    def to_json(self) -> dict:
        return {
            "phi": self.phi.to_json(),
            "x": [float(t) for t in self.x],
            "psi": self.psi.to_json(),
            "sigma_phi": self.sigma_phi.one_based(),
            "sigma_d": self.sigma_d.one_based(),
            "b": self.b,
            "sigma_chosen": self.sigma_chosen.one_based(),
            "psi_regenerations": self.psi_regenerations,
            "run_regenerations": self.run_regenerations,
        }


@dataclass(frozen=True)
class RunRecord:
    alice: Party
    bob: Party
    transcript: Transcript
    vA: float
    vB: float
    favorable: bool
    bitA: int | None
    bitB: int | None

    def to_json(self, public_only: bool = False) -> dict:
        if public_only:
            return self.transcript.to_json()
        return {
            "transcript": self.transcript.to_json(),
            "secrets": {"A": self.alice.to_json(), "B": self.bob.to_json()},
            "vA": self.vA,
            "vB": self.vB,
            "favorable": self.favorable,
            "bitA": self.bitA,
            "bitB": self.bitB,
        }


# ---------------------------------------------------------------------------
# steps


def step1_generate(params: ProtocolParams, rng):
    """Draw a compliant distribution and a secret vector from it."""
    phi = sample_zeta(params.zeta, params.n, rng)
    return phi, phi.sample(rng)


def step2_publish(x, params: ProtocolParams, rng) -> np.ndarray:
    return bernoulli_draw(degrade_params(x, params.k), rng)


def _decoy_exact(i: np.ndarray, psi: DiscreteDistribution, k: float) -> Permutation:
    canon = psi.permuted(tidying_permutation(psi))
    means = canon.component_means() / k  # (C, n)
    perms = np.array([p.mapping for p in all_permutations(i.size)])
    p = means[:, perms]  # (C, P, n): p[c, s, l] = means[c, perm_s[l]]
    lik = np.prod(np.where(i[None, None, :] == 1, p, 1.0 - p), axis=2)
    score = psi.weights @ lik
    best = score.max()
    first = int(np.flatnonzero(score >= best - TIE_RTOL * abs(best))[0])
    return Permutation(perms[first])


def _decoy_greedy(i: np.ndarray) -> Permutation:
    order = np.concatenate([np.flatnonzero(i == 1), np.flatnonzero(i == 0)])
    return Permutation(order).inverse()


def compute_sigma_d(i, psi: DiscreteDistribution, k: float) -> Permutation:
    """Most likely tidying permutation behind ``i`` when ``x`` follows ``psi``.

    Exact argmax over all permutations for ``n <= 6`` (ties go to the
    lexicographically smallest mapping). Larger ``n`` aligns the 1-bits of
    ``i`` with the largest coordinates of the canonical ``psi``, index order
    breaking ties.
    """
    i = as_bits(i, psi.n)
    k = check_k(k)
    if i.size <= min(EXACT_DECOY_N, MAX_ENUM_N):
        return _decoy_exact(i, psi, k)
    return _decoy_greedy(i)


@dataclass(frozen=True)
class DispersionCheck:
    mass: float
    stderr: float
    floor: float

    @property
    def passed(self) -> bool:
        return self.mass >= self.floor


def dispersion_mass(psi: DiscreteDistribution, i, k: float, samples: int, rng) -> DispersionCheck:
    """Mass of ``{x : sum(x) in [k|i| - sqrt(n), k|i| + sqrt(n)]}`` under ``psi``.

    Per-component Monte Carlo with ``samples`` uniform points per box.
    Components whose whole sum range falls inside or outside the band are
    evaluated exactly, as are Dirac components.
    """
    i = as_bits(i, psi.n)
    n = psi.n
    center = check_k(k) * int(i.sum())
    half = math.sqrt(n)
    fractions = np.empty(psi.size)
    variances = np.zeros(psi.size)
    for c in range(psi.size):
        lo, hi = psi.lo[c], psi.hi[c]
        s_lo, s_hi = lo.sum(), hi.sum()
        if s_lo >= center - half and s_hi <= center + half:
            fractions[c] = 1.0
            continue
        if s_hi < center - half or s_lo > center + half:
            fractions[c] = 0.0
            continue
        pts = lo + (hi - lo) * rng.random((samples, n))
        inside = np.abs(pts.sum(axis=1) - center) <= half
        f = inside.mean()
        fractions[c] = f
        variances[c] = f * (1 - f) / samples
    mass = float(psi.weights @ fractions)
    stderr = float(math.sqrt(psi.weights ** 2 @ variances))
    return DispersionCheck(mass, stderr, 1.0 / (2.0 * math.sqrt(n)))


def check_dispersion_mass(psi: DiscreteDistribution, i, params: ProtocolParams, rng=None) -> bool:
    rng = rng if rng is not None else np.random.default_rng(0)
    return dispersion_mass(psi, i, params.k, params.dispersion_samples, rng).passed


def _shift_to_band(phi: DiscreteDistribution, target_sum: float) -> DiscreteDistribution:
    delta = (target_sum - float(phi.mean().sum())) / phi.n
    half = phi.widths[:, None] / 2
    centers = np.clip(phi.centers + delta, np.minimum(half, 0.5), np.maximum(1 - half, 0.5))
    return DiscreteDistribution(phi.weights, centers, phi.widths)


def draw_psi(i, params: ProtocolParams, rng):
    """Compliant distribution recentered on ``sum(x) = k|i|``.

    Returns ``(psi, regenerations)``; candidates failing the dispersion-mass
    check are redrawn.
    """
    i = as_bits(i, params.n)
    target = params.k * int(i.sum())
    if target - math.sqrt(params.n) > params.n:
        raise DispersionInfeasible(f"k|i| = {target} is out of reach for n = {params.n}")
    for tries in range(MAX_PSI_TRIES):
        psi = _shift_to_band(sample_zeta(params.zeta, params.n, rng), target)
        if dispersion_mass(psi, i, params.k, params.dispersion_samples, rng).passed:
            return psi, tries
    raise DispersionInfeasible(f"no dispersion-compliant distribution after {MAX_PSI_TRIES} tries")


def step3_disperse(sigma_d: Permutation, sigma_phi: Permutation, rng):
    """Publish ``(sigma_d, sigma_phi)`` in random order; return the pair and the order bit."""
    b = int(rng.integers(2))
    pair = (sigma_d, sigma_phi) if b == 0 else (sigma_phi, sigma_d)
    return pair, b


def step4_synchronize(pair, rng) -> Permutation:
    return pair[int(rng.integers(2))]


def step5_value(own_vec, sigma_own: Permutation, sigma_chosen: Permutation, other_bits) -> float:
    """Tidied own vector dotted with the other side's bits reordered by the chosen permutation."""
    v = as_vector(own_vec)
    bits = as_bits(other_bits, v.size)
    if sigma_own.n != v.size or sigma_chosen.n != v.size:
        raise ValueError("permutation length mismatch")
    a = sigma_own.inverse().apply(v)
    b = sigma_chosen.inverse().apply(bits.astype(np.float64))
    return float(a @ b / v.size)


def binarize(v: float, tau: float) -> int:
    return int(v >= tau)


# ---------------------------------------------------------------------------
# orchestration


def _party_rngs(rng):
    seeds = rng.integers(0, 2 ** 63, size=2)
    return np.random.default_rng(int(seeds[0])), np.random.default_rng(int(seeds[1]))


def _prepare(params: ProtocolParams, rng):
    """Steps 1 to 3 of one party, redrawn whenever the published bits admit no dispersion."""
    for regen in range(MAX_RUN_REGENERATIONS):
        phi, x = step1_generate(params, rng)
        i = step2_publish(x, params, rng)
        try:
            psi, psi_regen = draw_psi(i, params, rng)
        except DispersionInfeasible:
            continue
        s = tidying_permutation(phi)
        d = compute_sigma_d(i, psi, params.k)
        mu, b = step3_disperse(d, s, rng)
        return phi, x, i, psi, s, d, mu, b, psi_regen, regen
    raise DispersionInfeasible(f"gave up after {MAX_RUN_REGENERATIONS} regenerations")


def run_instance(params: ProtocolParams, rng, force_favorable: bool = False) -> RunRecord:
    """Both parties' five steps with independent randomness.

    ``force_favorable`` replaces the synchronization choices by the true
    tidying permutations (used for calibration only).
    """
    ra, rb = _party_rngs(rng)
    phi_a, x, i, psi_a, s_a, d_a, mu_a, b_a, pr_a, rr_a = _prepare(params, ra)
    phi_b, y, j, psi_b, s_b, d_b, mu_b, b_b, pr_b, rr_b = _prepare(params, rb)
    choice_a = step4_synchronize(mu_b, ra)
    choice_b = step4_synchronize(mu_a, rb)
    if force_favorable:
        choice_a, choice_b = s_b, s_a
    v_a = step5_value(x, s_a, choice_a, j)
    v_b = step5_value(y, s_b, choice_b, i)
    favorable = choice_a == s_b and choice_b == s_a
    bit_a = bit_b = None
    if params.tau is not None:
        bit_a, bit_b = binarize(v_a, params.tau), binarize(v_b, params.tau)
    return RunRecord(
        Party(phi_a, x, psi_a, s_a, d_a, b_a, choice_a, pr_a, rr_a),
        Party(phi_b, y, psi_b, s_b, d_b, b_b, choice_b, pr_b, rr_b),
        Transcript(i, j, mu_a, mu_b),
        v_a,
        v_b,
        favorable,
        bit_a,
        bit_b,
    )


def calibrate_tau(params: ProtocolParams, runs: int, master_seed: int) -> float:
    """Median of ``V_A`` over favorable-case runs drawn from a dedicated stream."""
    values = [
        run_instance(params, stream(master_seed, "calibration", t), force_favorable=True).vA
        for t in range(runs)
    ]
    return float(np.median(values))
