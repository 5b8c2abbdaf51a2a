"""Deep random generation: compliant distribution sampling and the recursive generator.

The generator keeps a history of emitted distribution pairs. At every step
it computes the Bayes-optimal opponent strategy against the uniform mixture
of that history (the best response), then emits a new pair on which this
strategy's quadratic error exceeds ``alpha_gap`` times the legitimate
parties' own error. Errors are evaluated on the favorable-case channel of
the protocol, exactly, by outcome enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import check_k, outcomes
from .core import DiscreteDistribution, remoteness, remoteness_bound
from .oracle import JointDistribution, StrategyTable, moment_tables
from .rng import stream

MAX_ZETA_TRIES = 10_000
EXACT_REMOTENESS_N = 5
TOP_QUANTILE = 0.75


class ZetaSamplingError(RuntimeError):
    """Rejection budget exhausted while sampling a compliant distribution."""


class DrgShortfall(RuntimeError):
    """No grid pair defeats the current best response by the required gap."""


@dataclass(frozen=True)
class ZetaParams:
    """Floors defining the compliant family.

    ``alpha_remote`` bounds the total-variation distance to the symmetric
    projection from below, ``min_width`` keeps every component a proper
    box (no point masses) and ``bumps`` is the number of mixture components.
    """

    alpha_remote: float = 0.3
    min_width: float = 0.05
    bumps: int = 3

    def __post_init__(self):
        if not 0.0 <= self.alpha_remote < 1.0:
            raise ValueError("alpha_remote must lie in [0, 1)")
        if not 0.0 < self.min_width <= 1.0:
            raise ValueError("min_width must lie in (0, 1]")
        if int(self.bumps) < 1:
            raise ValueError("bumps must be >= 1")

    def to_json(self) -> dict:
        return {"alpha_remote": self.alpha_remote, "min_width": self.min_width, "bumps": self.bumps}

    @classmethod
    def from_json(cls, doc: dict) -> "ZetaParams":
        return cls(float(doc["alpha_remote"]), float(doc["min_width"]), int(doc["bumps"]))


def certified_remoteness(phi: DiscreteDistribution, floor: float | None = None) -> float:
    """A value known to be <= remoteness(phi).

    The analytic bound is tried first; small n falls back to the exact
    computation when the bound alone does not clear ``floor``.
    """
    bound = remoteness_bound(phi)
    if floor is not None and bound >= floor:
        return bound
    if phi.n <= EXACT_REMOTENESS_N:
        return remoteness(phi)
    return bound


def zeta_compliant(phi: DiscreteDistribution, params: ZetaParams) -> bool:
    if np.any(phi.widths < params.min_width - 1e-15):
        return False
    if params.alpha_remote == 0:
        return True
    return certified_remoteness(phi, params.alpha_remote) >= params.alpha_remote


def _draw_candidate(params: ZetaParams, n: int, rng) -> DiscreteDistribution:
    order = rng.permutation(n)
    low_level = rng.uniform(0.0, 0.6)
    high_level = rng.uniform(low_level + 0.3, 1.0)
    widths = params.min_width * (1.0 + rng.random(params.bumps))
    centers = np.empty((params.bumps, n))
    for b, w in enumerate(widths):
        a = min(low_level + w / 2, 1 - w / 2)
        z = max(a, high_level - w / 2)
        vals = np.sort(rng.uniform(a, z, n))[::-1]
        centers[b, order] = vals
    weights = rng.dirichlet(np.ones(params.bumps))
    return DiscreteDistribution(weights, np.clip(centers, 0, 1), widths)


def sample_zeta(params: ZetaParams, n: int, rng) -> DiscreteDistribution:
    """Rejection-sample a compliant distribution.

    Each candidate is a mixture of boxes whose centers share one random
    coordinate ordering (sorted draws between a random low and high
    level), which pushes the mass into a single ordering chamber.
    """
    if n == 1 and params.alpha_remote > 0:
        raise ValueError("n = 1 admits no remote distribution: S_1 is trivial")
    for _ in range(MAX_ZETA_TRIES):
        phi = _draw_candidate(params, n, rng)
        if zeta_compliant(phi, params):
            return phi
    raise ZetaSamplingError(f"no compliant distribution after {MAX_ZETA_TRIES} tries (n={n}, {params})")


# ---------------------------------------------------------------------------
# favorable-channel emulation


def _canonical_orders(centers: np.ndarray) -> np.ndarray:
    """Per row, coordinates sorted by decreasing value (index tie-break)."""
    return np.argsort(-centers, axis=1, kind="stable")


@dataclass
class FavorableTerms:
    """Per-outcome expectations for a batch of product components.

    Arrays have shape ``(C, O, O)``; entry ``[c, i, j]`` is
    ``E_c[f * P(i|x) P(j|y)]`` for ``f`` in ``1, V_A, V_A^2, V_B, V_B^2,
    V_A V_B`` where, with canonical orders taken from each component's
    centers, ``V_A = x~ . j~ / n`` and ``V_B = i~ . y~ / n``. ``target``
    uses ``f = x~ . y~ / (k n)``, the conditional mean of both values given
    ``(x, y)``.
    """

    den: np.ndarray
    target: np.ndarray
    va: np.ndarray
    va2: np.ndarray
    vb: np.ndarray
    vb2: np.ndarray
    vab: np.ndarray

    def opponent_error(self, table: np.ndarray) -> np.ndarray:
        t = table[None, :, :]
        return np.sum(t * t * self.den - 2 * t * self.va + self.va2, axis=(1, 2))

    def legitimate_error(self) -> np.ndarray:
        return np.sum(self.vb2 - 2 * self.vab + self.va2, axis=(1, 2))


def favorable_terms(J: JointDistribution, k: float) -> FavorableTerms:
    k = check_k(k)
    n = J.n
    bits = outcomes(n).astype(np.float64)
    Zx, Ax, Bx = moment_tables(*J.x_bounds, k)
    Zy, Ay, By = moment_tables(*J.y_bounds, k)
    sA = _canonical_orders(J.x_centers)
    sB = _canonical_orders(J.y_centers)
    Axc = np.take_along_axis(Ax, sA[:, None, :], axis=2)
    Ayc = np.take_along_axis(Ay, sB[:, None, :], axis=2)
    Bxc = Bx[np.arange(J.size)[:, None, None], :, sA[:, :, None], sA[:, None, :]].transpose(0, 3, 1, 2)
    Byc = By[np.arange(J.size)[:, None, None], :, sB[:, :, None], sB[:, None, :]].transpose(0, 3, 1, 2)
    Ic = bits[:, sA].transpose(1, 0, 2)  # (C, O, n)
    Jc = bits[:, sB].transpose(1, 0, 2)
    a1 = np.einsum("cil,cjl->cij", Axc, Jc) / n
    b1 = np.einsum("cil,cjl->cij", Ic, Ayc) / n
    zx = Zx[:, :, None]
    zy = Zy[:, None, :]
    return FavorableTerms(
        den=zx * zy,
        target=np.einsum("cil,cjl->cij", Axc, Ayc) / (k * n),
        va=a1 * zy,
        va2=np.einsum("cilm,cjl,cjm->cij", Bxc, Jc, Jc) / n ** 2 * zy,
        vb=b1 * zx,
        vb2=np.einsum("cil,cim,cjlm->cij", Ic, Ic, Byc) / n ** 2 * zx,
        vab=a1 * b1,
    )


# ---------------------------------------------------------------------------
# generator


@dataclass(frozen=True)
class DrgParams:
    n: int = 2
    k: float = 1.0
    grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    alpha_gap: float = 1.2
    zeta: ZetaParams = field(default_factory=lambda: ZetaParams(min_width=0.02))
    counters: int = 2

    def __post_init__(self):
        check_k(self.k)
        if self.alpha_gap <= 1:
            raise ValueError("alpha_gap must exceed 1")
        if not self.grid:
            raise ValueError("empty grid")
        if self.n > 4:
            raise ValueError("the generator relies on the exhaustive oracle: n <= 4")

    def grid_points(self) -> np.ndarray:
        g = np.asarray(self.grid, dtype=np.float64)
        return np.array(np.meshgrid(*([g] * self.n), indexing="ij")).reshape(self.n, -1).T

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "grid": list(self.grid),
            "alpha_gap": self.alpha_gap,
            "zeta": self.zeta.to_json(),
            "counters": self.counters,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DrgParams":
        return cls(
            int(doc["n"]), float(doc["k"]), tuple(doc["grid"]), float(doc["alpha_gap"]),
            ZetaParams.from_json(doc["zeta"]), int(doc.get("counters", 2)),
        )


def prior_over_grid(params: DrgParams) -> JointDistribution:
    pts = params.grid_points()
    phi = DiscreteDistribution(np.full(len(pts), 1.0 / len(pts)), pts, np.zeros(len(pts)))
    return JointDistribution.from_product(phi, phi)


def favorable_posterior_table(prior: JointDistribution, k: float) -> StrategyTable:
    """Posterior mean of ``x~ . y~ / (k n)`` for every outcome pair under ``prior``.

    Zero-evidence outcomes get the prior mean.
    """
    terms = favorable_terms(prior, k)
    w = prior.weights[:, None, None]
    den = np.sum(w * terms.den, axis=0)
    num = np.sum(w * terms.target, axis=0)
    table = np.full_like(den, float(np.sum(num)))
    ok = den > 0
    table[ok] = num[ok] / den[ok]
    return StrategyTable(prior.n, table)


def best_response(history: list, params: DrgParams) -> StrategyTable:
    """MMSE strategy for ``x~ . y~ / (k n)`` against the uniform mixture of ``history``.

    The target is the tidied evaluation function scaled to the units of
    ``V_A``. An empty history means the uniform prior over the grid's Dirac
    pairs.
    """
    prior = JointDistribution.mixture(history) if history else prior_over_grid(params)
    return favorable_posterior_table(prior, params.k)


def pair_ratios(table: StrategyTable, J: JointDistribution, k: float):
    """Per-component (opponent error, legitimate error, ratio)."""
    terms = favorable_terms(J, k)
    opp = terms.opponent_error(table.values)
    leg = terms.legitimate_error()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(leg > 0, opp / leg, np.nan)
    return opp, leg, ratio


@dataclass
class DefeatingPair:
    x: np.ndarray
    y: np.ndarray
    ratio: float
    shortfall: bool
    qualifying: list  # indices into the candidate list, ascending
    candidates: np.ndarray  # (m, 2, n) grid pairs considered
    ratios: np.ndarray


def _candidate_pairs(params: DrgParams):
    """Grid pairs whose widened boxes are compliant (remote enough)."""
    pts = params.grid_points()
    w = params.zeta.min_width
    ok = [
        p for p in pts
        if params.zeta.alpha_remote == 0
        or certified_remoteness(DiscreteDistribution.box(p, w), params.zeta.alpha_remote) >= params.zeta.alpha_remote
    ]
    ok = np.array(ok)
    a, b = np.meshgrid(np.arange(len(ok)), np.arange(len(ok)), indexing="ij")
    return np.stack([ok[a.ravel()], ok[b.ravel()]], axis=1)


def defeating_pair(table: StrategyTable, params: DrgParams) -> DefeatingPair:
    """Grid pair maximizing the opponent/legitimate error ratio.

    Every grid pair is evaluated as a pair of point masses; pairs with zero
    legitimate error are skipped. ``qualifying`` lists all pairs reaching
    ``alpha_gap``.
    """
    cands = _candidate_pairs(params)
    if len(cands) == 0:
        raise ValueError("empty grid after compliance filtering")
    J = JointDistribution(np.full(len(cands), 1.0 / len(cands)), cands[:, 0], np.zeros(len(cands)), cands[:, 1], np.zeros(len(cands)))
    _, leg, ratio = pair_ratios(table, J, params.k)
    ratio = np.where(leg > 1e-15, ratio, -np.inf)
    best = int(np.argmax(ratio))
    qualifying = [int(t) for t in np.flatnonzero(ratio >= params.alpha_gap)]
    return DefeatingPair(
        cands[best, 0], cands[best, 1], float(ratio[best]), float(ratio[best]) < params.alpha_gap,
        qualifying, cands, ratio,
    )


@dataclass
class DrgState:
    master_seed: int
    counters: list
    history: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    entropy_bits: int = 0
    step: int = 0

    @classmethod
    def fresh(cls, master_seed: int, params: DrgParams) -> "DrgState":
        return cls(int(master_seed) & ((1 << 64) - 1), [0] * params.counters)

    def validate(self):
        if self.step != len(self.history) or len(self.ratios) != len(self.history):
            raise ValueError("corrupted DRG state: step, history and ratios disagree")
        if any(c < 0 for c in self.counters):
            raise ValueError("corrupted DRG state: negative counter")

    def to_json(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "counters": list(self.counters),
            "step": self.step,
            "entropy_bits": self.entropy_bits,
            "ratios": list(self.ratios),
            "history": [J.to_json() for J in self.history],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DrgState":
        state = cls(
            int(doc["master_seed"]),
            [int(c) for c in doc["counters"]],
            [JointDistribution.from_json(h) for h in doc["history"]],
            [float(r) for r in doc["ratios"]],
            int(doc.get("entropy_bits", 0)),
            int(doc["step"]),
        )
        state.validate()
        return state


def widened_ratios(table: StrategyTable, found: DefeatingPair, params: DrgParams) -> np.ndarray:
    """Ratios of the qualifying pairs after widening both points to ``min_width`` boxes."""
    q = np.asarray(found.qualifying)
    c = found.candidates[q]
    J = JointDistribution(np.full(len(q), 1.0 / len(q)), c[:, 0], params.zeta.min_width, c[:, 1], params.zeta.min_width)
    return pair_ratios(table, J, params.k)[2]


def emission_pool(table: StrategyTable, found: DefeatingPair, params: DrgParams, quantile: float | None = None) -> list:
    """Qualifying pairs still qualifying once widened, restricted to the top ratios.

    Drawing from the strongest pairs keeps the recursion alive longer than
    drawing from every qualifying pair.
    """
    if quantile is None:
        quantile = TOP_QUANTILE
    if not found.qualifying:
        return []
    q = np.asarray(found.qualifying)
    r = widened_ratios(table, found, params)
    keep = r >= params.alpha_gap
    if not np.any(keep):
        return []
    q, r = q[keep], r[keep]
    return [int(t) for t in q[r >= np.quantile(r, quantile)]]


def drg_next(state: DrgState, params: DrgParams):
    """Emit one defeating distribution pair and the advanced state.

    The classical randomness that picks among the strongest qualifying
    grid pairs comes from a stream keyed by the master seed and the current
    counters.
    """
    state.validate()
    table = best_response(state.history, params)
    found = defeating_pair(table, params)
    if not found.qualifying:
        raise DrgShortfall(f"step {state.step}: best ratio {found.ratio:.4f} < {params.alpha_gap}")
    pool = emission_pool(table, found, params)
    if not pool:
        raise DrgShortfall(f"step {state.step}: no qualifying pair survives widening")
    rng = stream(state.master_seed, "drg", *state.counters)
    x, y = found.candidates[pool[int(rng.integers(len(pool)))]]
    J = JointDistribution.box_pair(x, y, params.zeta.min_width)
    ratio = float(pair_ratios(table, J, params.k)[2][0])
    counters = [c + r + 1 for r, c in enumerate(state.counters)]
    new = DrgState(
        state.master_seed,
        counters,
        state.history + [J],
        state.ratios + [ratio],
        state.entropy_bits + math.ceil(math.log2(len(pool))),
        state.step + 1,
    )
    return J, new


def drg_run(steps: int, params: DrgParams, master_seed: int) -> DrgState:
    state = DrgState.fresh(master_seed, params)
    for _ in range(steps):
        _, state = drg_next(state, params)
    return state


@dataclass
class AuditReport:
    steps: int
    ratios: list
    min_ratio: float | None
    shortfalls: list
    zeta_violations: list
    alpha_gap: float

    @property
    def passed(self) -> bool:
        return not self.shortfalls and not self.zeta_violations

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "ratios": self.ratios,
            "min_ratio": self.min_ratio,
            "shortfalls": self.shortfalls,
            "zeta_violations": self.zeta_violations,
            "alpha_gap": self.alpha_gap,
            "pass": self.passed,
        }


def drg_audit(state: DrgState, params: DrgParams) -> AuditReport:
    """Replay the history and recheck every step's defeating ratio."""
    state.validate()
    ratios, shortfalls, violations = [], [], []
    for m, J in enumerate(state.history):
        if J.n != params.n:
            raise ValueError(f"corrupted DRG state: history entry {m} has n = {J.n}")
        table = best_response(state.history[:m], params)
        _, _, ratio = pair_ratios(table, J, params.k)
        r = float(np.min(ratio))
        ratios.append(r)
        if not r >= params.alpha_gap:
            shortfalls.append(m)
        for phi in (J.x_marginal(), J.y_marginal()):
            if not _emitted_compliant(phi, params.zeta):
                violations.append(m)
                break
    return AuditReport(
        len(state.history), ratios, min(ratios) if ratios else None, shortfalls, violations, params.alpha_gap
    )


def _emitted_compliant(phi: DiscreteDistribution, zeta: ZetaParams) -> bool:
    return zeta_compliant(phi, zeta)
