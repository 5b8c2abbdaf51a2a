"""Passive opponent strategies and their evaluation against protocol runs.

A strategy is frozen when built (elaboration) and afterwards maps a public
:class:`~deeprand.protocol.Transcript` to an estimate of ``V_A``
(instantiation). Every strategy declares the symmetry class it respects:

``"transposition"``
    unchanged when either published permutation pair is swapped;
``"common_permutation"``
    additionally unchanged under a joint relabeling of coordinates;
``"none"``
    no declared symmetry.
"""

from __future__ import annotations

import csv
import inspect
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import as_bits, check_k, outcome_index, outcomes
from .core import Permutation, all_permutations
from .drg import favorable_posterior_table
from .oracle import (
    PHI,
    Evaluation,
    JointDistribution,
    StrategyTable,
    common_permutation_group,
    group_average,
    posterior_mean,
)
from .protocol import RunRecord, Transcript, binarize

INVARIANCE_CLASSES = ("none", "transposition", "common_permutation")
PAIR_ORDER = {(1, 1): 0, (1, 0): 1, (0, 1): 2, (0, 0): 3}


# ---------------------------------------------------------------------------
# symmetry helpers


def canonicalize_pair(i, j) -> tuple:
    """Orbit key of ``(i, j)`` under common coordinate permutations.

    The coordinate pairs ``(i_l, j_l)`` are listed in the fixed order
    11, 10, 01, 00.
    """
    i = as_bits(i)
    j = as_bits(j, i.size)
    pairs = sorted(zip(i.tolist(), j.tolist()), key=PAIR_ORDER.__getitem__)
    return tuple(pairs)


def relabel_transcript(t: Transcript, pi: Permutation) -> Transcript:
    """The same run with every coordinate relabeled by ``pi``.

    Bits become ``pi.apply(bits)`` and each published permutation ``mu``
    becomes ``compose(pi, mu)``, which leaves every tidied vector unchanged.
    """
    return Transcript(
        pi.apply(t.i),
        pi.apply(t.j),
        tuple(pi.compose(m) for m in t.muA),
        tuple(pi.compose(m) for m in t.muB),
    )


def swap_pairs(t: Transcript, swap_a: bool, swap_b: bool) -> Transcript:
    muA = t.muA[::-1] if swap_a else t.muA
    muB = t.muB[::-1] if swap_b else t.muB
    return Transcript(t.i, t.j, muA, muB)


def order_bit(pair) -> int:
    """0 when the pair is listed in lexicographic order of mappings, else 1."""
    return int(pair[0].mapping > pair[1].mapping)


def enforce_transposition_invariance(values) -> np.ndarray:
    """Average a table indexed ``[i, j, order_A, order_B]`` over both order bits."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 4 or v.shape[2:] != (2, 2) or v.shape[0] != v.shape[1]:
        raise ValueError("table must have shape (2**n, 2**n, 2, 2)")
    if not np.all(np.isfinite(v)):
        raise ValueError("partial table: every entry must be a finite number")
    avg = v.mean(axis=(2, 3), keepdims=True)
    return np.broadcast_to(avg, v.shape).copy()


def tidied(v, sigma: Permutation) -> np.ndarray:
    return sigma.inverse().apply(np.asarray(v, dtype=np.float64))


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class OpponentStrategy:
    """Base class: ``estimate`` may only receive the public transcript."""

    name: str
    kind: str = field(default="base", init=False)
    invariance: str = field(default="none", init=False)

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        params = list(inspect.signature(cls.estimate).parameters)
        if params != ["self", "transcript"]:
            raise TypeError(f"{cls.__name__}.estimate must take exactly (self, transcript)")

    def estimate(self, transcript: Transcript) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class InnerProduct(OpponentStrategy):
    """``k i.j / n``: the unbiased inner-product estimator rescaled to ``V_A`` units."""

    k: float = 3.0
    kind: str = field(default="inner_product", init=False)
    invariance: str = field(default="common_permutation", init=False)

    def estimate(self, transcript: Transcript) -> float:
        i = transcript.i.astype(np.float64)
        return float(self.k * (i @ transcript.j) / transcript.n)


@dataclass(frozen=True)
class DispersedInnerProduct(OpponentStrategy):
    """Inner product of the tidied bits, averaged over the four choices of published permutations."""

    k: float = 3.0
    kind: str = field(default="inner_product", init=False)
    invariance: str = field(default="common_permutation", init=False)

    def estimate(self, transcript: Transcript) -> float:
        total = 0.0
        for sa in transcript.muA:
            ti = tidied(transcript.i, sa)
            for sb in transcript.muB:
                total += ti @ tidied(transcript.j, sb)
        return float(self.k * total / (4 * transcript.n))


def level_grid(step: float = 0.1, max_low: float = 0.6, min_span: float = 0.3) -> tuple:
    """``(low, high)`` pairs on a regular grid with ``high - low >= min_span``."""
    pts = np.round(np.arange(0.0, 1.0 + 1e-9, step), 10)
    return tuple(
        (float(a), float(b)) for a in pts if a <= max_low + 1e-9 for b in pts if b >= a + min_span - 1e-9
    )


@dataclass(frozen=True)
class LevelPosterior(OpponentStrategy):
    """Posterior estimate of ``x~ . y~ / (k n)`` under an exchangeable level mixture.

    The assumed prior draws a level pair ``(low, high)`` uniformly from
    ``levels``, then every coordinate iid uniform on ``[low, high]``, for x
    and y independently. Such a prior is invariant under every coordinate
    permutation, so the posterior depends on the transcript only through
    ``|i|`` and ``|j|``; the sorted-vector expectation uses uniform order
    statistics.
    """

    k: float = 3.0
    levels: tuple = ((0.0, 1.0),)
    kind: str = field(default="rg_posterior", init=False)
    invariance: str = field(default="common_permutation", init=False)

    def __post_init__(self):
        check_k(self.k)
        if not self.levels:
            raise ValueError("empty level set")
        for lo, hi in self.levels:
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"bad level pair {(lo, hi)}")

    def _sorted_mean(self, weight: int, n: int) -> np.ndarray:
        return _level_sorted_mean(self.levels, float(self.k), int(weight), int(n))

    def estimate(self, transcript: Transcript) -> float:
        n = transcript.n
        ex = self._sorted_mean(int(transcript.i.sum()), n)
        ey = self._sorted_mean(int(transcript.j.sum()), n)
        return float(ex @ ey / (self.k * n))


@lru_cache(maxsize=4096)
def _level_sorted_mean(levels: tuple, k: float, weight: int, n: int) -> np.ndarray:
    lv = np.asarray(levels, dtype=np.float64)
    p = np.clip(lv.mean(axis=1) / k, 1e-300, 1 - 1e-16)
    loglik = weight * np.log(p) + (n - weight) * np.log1p(-p)
    post = np.exp(loglik - loglik.max())
    post /= post.sum()
    ranks = (n - np.arange(n)) / (n + 1.0)  # descending order statistics of U(0, 1)
    sorted_means = lv[:, :1] + (lv[:, 1:] - lv[:, :1]) * ranks[None, :]
    out = post @ sorted_means
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TableStrategy(OpponentStrategy):
    """Lookup in a full ``(i, j)`` table; small n only."""

    table: StrategyTable = None
    declared: str = "none"
    kind: str = field(default="table", init=False)

    def __post_init__(self):
        if self.table is None:
            raise ValueError("table required")
        if self.declared not in INVARIANCE_CLASSES:
            raise ValueError(f"unknown invariance class {self.declared!r}")
        object.__setattr__(self, "invariance", self.declared)

    def estimate(self, transcript: Transcript) -> float:
        return float(self.table.values[outcome_index(transcript.i), outcome_index(transcript.j)])


def rg_posterior_table(assumed_mixture: JointDistribution, k: float) -> StrategyTable:
    """Favorable-value posterior table after symmetrizing the prior over common permutations."""
    sym = group_average(assumed_mixture, common_permutation_group(assumed_mixture.n))
    return favorable_posterior_table(sym, k)


def rg_posterior_strategy(name: str, assumed_mixture: JointDistribution, k: float) -> TableStrategy:
    return TableStrategy(name, rg_posterior_table(assumed_mixture, k), "common_permutation")


def strategy_rg_posterior(
    transcript: Transcript, assumed_mixture: JointDistribution, k: float, phi: Evaluation = PHI
) -> float:
    """``E[phi | i, j]`` under the common-permutation average of ``assumed_mixture``.

    Raises :class:`~deeprand.oracle.ZeroEvidenceError` on impossible outcomes.
    """
    sym = group_average(assumed_mixture, common_permutation_group(assumed_mixture.n))
    return posterior_mean(sym, transcript.i, transcript.j, k, phi)


@dataclass(frozen=True)
class CheatingControl:
    """Reads the secret vectors: ``E[V_A | x, y]`` in the favorable case.

    Not an opponent; it measures the channel-noise floor.
    """

    name: str = "cheating_control"
    k: float = 3.0

    def estimate_with_secrets(self, record: RunRecord) -> float:
        a, b = record.alice, record.bob
        xs = tidied(a.x, a.sigma_phi)
        ys = tidied(b.x, b.sigma_phi)
        return float(xs @ ys / (self.k * xs.size))


def default_suite(n: int, k: float) -> list:
    """Strategies shipped for evaluation, frozen before any run exists."""
    suite = [
        InnerProduct("inner_product", k),
        DispersedInnerProduct("dispersed_inner_product", k),
        LevelPosterior("rg_posterior_uniform", k, ((0.0, 1.0),)),
        LevelPosterior("rg_posterior_levels", k, level_grid()),
    ]
    if n <= 3:
        grid = JointDistribution.grid_uniform(n, 5)
        suite.append(rg_posterior_strategy("rg_posterior_grid_exact", grid, k))
    return suite


# ---------------------------------------------------------------------------
# evaluation

COLUMNS = ("mse_all", "mse_favorable", "bit_error_all", "bit_error_favorable")


def _nan_mean(a: np.ndarray) -> float:
    return float(a.mean()) if a.size else float("nan")


@dataclass
class EvaluationTable:
    rows: dict  # strategy name -> {column: value}
    runs: int
    favorable_runs: int
    tau: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("strategy",) + COLUMNS)
        for name, row in self.rows.items():
            w.writerow([name] + [repr(float(row[c])) for c in COLUMNS])
        return buf.getvalue()

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

        return {
            "runs": self.runs,
            "favorable_runs": self.favorable_runs,
            "tau": self.tau,
            "strategies": {name: {c: num(row[c]) for c in COLUMNS} for name, row in self.rows.items()},
        }


def evaluation_table(va, estimates: dict, favorable, tau: float) -> EvaluationTable:
    """Aggregate per-run estimates (``name -> array``) against ``V_A``."""
    va = np.asarray(va, dtype=np.float64)
    fav = np.asarray(favorable, dtype=bool)
    if va.size == 0:
        raise ValueError("no runs to evaluate")
    bit_a = va >= tau
    rows = {}
    for name, est in estimates.items():
        est = np.asarray(est, dtype=np.float64)
        err2 = (est - va) ** 2
        flips = (est >= tau) != bit_a
        rows[name] = {
            "mse_all": _nan_mean(err2),
            "mse_favorable": _nan_mean(err2[fav]),
            "bit_error_all": _nan_mean(flips),
            "bit_error_favorable": _nan_mean(flips[fav]),
        }
    return EvaluationTable(rows, int(va.size), int(fav.sum()), float(tau))


def check_roster(strategies, controls=(), reference: str = "B"):
    for s in strategies:
        if not isinstance(s, OpponentStrategy):
            raise TypeError(f"{s!r} is not an OpponentStrategy")
    names = [s.name for s in strategies] + [c.name for c in controls]
    if len(set(names)) != len(names) or reference in names:
        raise ValueError("strategy names must be unique and distinct from the reference row")


def run_estimates(strategies, controls, record: RunRecord) -> dict:
    """Every strategy's estimate for one run; strategies see the transcript only."""
    out = {s.name: s.estimate(record.transcript) for s in strategies}
    out.update({c.name: c.estimate_with_secrets(record) for c in controls})
    return out


def evaluate_strategies(strategies, runs, tau: float, controls=(), reference: str = "B") -> EvaluationTable:
    """MSE against ``V_A`` and bit error against A's bit, over all and over favorable runs.

    Strategies only ever receive ``run.transcript``. ``controls`` read the
    full record. A row named ``reference`` reports B's own value for comparison.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to evaluate")
    check_roster(strategies, controls, reference)
    per_run = [run_estimates(strategies, controls, r) for r in runs]
    estimates = {reference: [r.vB for r in runs]}
    for name in per_run[0]:
        estimates[name] = [e[name] for e in per_run]
    return evaluation_table([r.vA for r in runs], estimates, [r.favorable for r in runs], tau)


def orbit_keys(n: int) -> set:
    outs = outcomes(n)
    return {canonicalize_pair(i, j) for i in outs for j in outs}
