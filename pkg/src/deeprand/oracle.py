"""Exhaustive Bayesian inference on small instances.

All expectations are exact: the likelihood ``P(i|x)`` is multilinear in
``x``, so integrating ``x_l^r P(i|x)`` over a uniform box only needs
per-coordinate raw moments up to order three (see
:func:`deeprand.kernels.box_outcome_moments`). No quadrature subdivision
is ever needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .channel import as_bits, check_k, outcome_index, outcomes
from .core import DiscreteDistribution, Permutation, all_permutations, as_vector

MAX_ORACLE_N = 4
MAX_COMPONENTS = 10_000


class ZeroEvidenceError(ValueError):
    """The observed outcome has likelihood 0 under every prior component."""


@dataclass(frozen=True)
class Evaluation:
    """Evaluation map ``phi(x, y) = scale * x.y / n + offset``."""

    scale: float = 1.0
    offset: float = 0.0

    def __call__(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape:
            raise ValueError("length mismatch")
        return float(self.scale * np.dot(x, y) / x.size + self.offset)

    def shifted(self, c: float) -> "Evaluation":
        return Evaluation(self.scale, self.offset + c)


PHI = Evaluation()


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Mixture of product components ``w_c * U(x-box_c) x U(y-box_c)``."""

    weights: np.ndarray
    x_centers: np.ndarray
    x_widths: np.ndarray
    y_centers: np.ndarray
    y_widths: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("joint weights must be positive and sum to 1")
        arrays = {}
        for name in ("x_centers", "y_centers"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim == 1:
                a = a.reshape(1, -1)
            if a.shape[0] != w.size or np.any(a < 0) or np.any(a > 1):
                raise ValueError(f"{name} must have one row in [0, 1]^n per component")
            arrays[name] = a
        if arrays["x_centers"].shape != arrays["y_centers"].shape:
            raise ValueError("x and y components must share the dimension n")
        for name in ("x_widths", "y_widths"):
            h = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if h.size == 1 and w.size > 1:
                h = np.full(w.size, h[0])
            if h.size != w.size or np.any(h < 0):
                raise ValueError(f"{name} must be non-negative, one per component")
            arrays[name] = h
        object.__setattr__(self, "weights", w / w.sum())
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_product(cls, phi_x: DiscreteDistribution, phi_y: DiscreteDistribution) -> "JointDistribution":
        """Independent x and y: every pair of components."""
        a, b = np.meshgrid(np.arange(phi_x.size), np.arange(phi_y.size), indexing="ij")
        a, b = a.ravel(), b.ravel()
        return cls(
            phi_x.weights[a] * phi_y.weights[b],
            phi_x.centers[a], phi_x.widths[a],
            phi_y.centers[b], phi_y.widths[b],
        )

    @classmethod
    def dirac_pair(cls, x, y) -> "JointDistribution":
        x, y = as_vector(x), as_vector(y, len(x))
        return cls(np.ones(1), x[None, :], np.zeros(1), y[None, :], np.zeros(1))

    @classmethod
    def box_pair(cls, x, y, width: float) -> "JointDistribution":
        x, y = as_vector(x), as_vector(y, len(x))
        return cls(np.ones(1), x[None, :], np.array([width]), y[None, :], np.array([width]))

    @classmethod
    def grid_uniform(cls, n: int, points: int) -> "JointDistribution":
        """Uniform prior over Dirac pairs with coordinates on a regular grid."""
        grid = np.linspace(0.0, 1.0, points)
        pts = np.array(np.meshgrid(*([grid] * n), indexing="ij")).reshape(n, -1).T
        phi = DiscreteDistribution(np.full(len(pts), 1.0 / len(pts)), pts, np.zeros(len(pts)))
        return cls.from_product(phi, phi)

    @classmethod
    def mixture(cls, parts: Sequence["JointDistribution"], weights=None) -> "JointDistribution":
        if weights is None:
            weights = np.full(len(parts), 1.0 / len(parts))
        return cls(
            np.concatenate([wt * p.weights for wt, p in zip(weights, parts)]),
            np.concatenate([p.x_centers for p in parts]),
            np.concatenate([p.x_widths for p in parts]),
            np.concatenate([p.y_centers for p in parts]),
            np.concatenate([p.y_widths for p in parts]),
        )

    # geometry ---------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.x_centers.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    @staticmethod
    def _bounds(c, h):
        return np.clip(c - 0.5 * h[:, None], 0, 1), np.clip(c + 0.5 * h[:, None], 0, 1)

    @property
    def x_bounds(self):
        return self._bounds(self.x_centers, self.x_widths)

    @property
    def y_bounds(self):
        return self._bounds(self.y_centers, self.y_widths)

    def x_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.weights, self.x_centers, self.x_widths).merged()

    def y_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.weights, self.y_centers, self.y_widths).merged()

    def permuted(self, sigma: Permutation, sigma_prime: Permutation) -> "JointDistribution":
        """``J o tau`` for ``tau(x, y) = (sigma(x), sigma_prime(y))``."""
        return JointDistribution(
            self.weights,
            sigma.inverse().apply(self.x_centers), self.x_widths,
            sigma_prime.inverse().apply(self.y_centers), self.y_widths,
        )

    def merged(self, decimals: int = 12) -> "JointDistribution":
        keys = np.round(np.column_stack([self.x_centers, self.x_widths, self.y_centers, self.y_widths]), decimals)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        w = np.bincount(inverse.reshape(-1), weights=self.weights, minlength=uniq.shape[0])
        n = self.n
        return JointDistribution(
            w,
            np.clip(uniq[:, :n], 0, 1), np.maximum(uniq[:, n], 0),
            np.clip(uniq[:, n + 1:2 * n + 1], 0, 1), np.maximum(uniq[:, 2 * n + 1], 0),
        )

    def prior_mean(self, phi: Evaluation = PHI) -> float:
        xl, xh = self.x_bounds
        yl, yh = self.y_bounds
        mx, my = 0.5 * (xl + xh), 0.5 * (yl + yh)
        return float(phi.scale * np.sum(self.weights * np.sum(mx * my, axis=1)) / self.n + phi.offset)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "components": [
                {
                    "w": float(w),
                    "x": {"center": [float(t) for t in xc], "width": float(xw)},
                    "y": {"center": [float(t) for t in yc], "width": float(yw)},
                }
                for w, xc, xw, yc, yw in zip(self.weights, self.x_centers, self.x_widths, self.y_centers, self.y_widths)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "JointDistribution":
        comps = doc["components"]
        return cls(
            [c["w"] for c in comps],
            [c["x"]["center"] for c in comps], [c["x"]["width"] for c in comps],
            [c["y"]["center"] for c in comps], [c["y"]["width"] for c in comps],
        )


def same_joint(a: JointDistribution, b: JointDistribution, tol: float = 1e-12) -> bool:
    ma, mb = a.merged(), b.merged()
    if ma.size != mb.size or ma.n != mb.n:
        return False
    return bool(
        np.allclose(ma.weights, mb.weights, atol=tol)
        and np.allclose(ma.x_centers, mb.x_centers, atol=1e-12)
        and np.allclose(ma.y_centers, mb.y_centers, atol=1e-12)
        and np.allclose(ma.x_widths, mb.x_widths, atol=1e-12)
        and np.allclose(ma.y_widths, mb.y_widths, atol=1e-12)
    )


# ---------------------------------------------------------------------------
# moment tables


def moment_tables(lo, hi, k: float):
    """Z, A, B tables (see kernels) with duplicate boxes computed once."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    keys = np.column_stack([lo, hi])
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n = lo.shape[1]
    Z, A, B = kernels.box_outcome_moments(uniq[:, :n], uniq[:, n:], float(k))
    return Z[inverse], A[inverse], B[inverse]


def _check_size(J: JointDistribution):
    if J.n > MAX_ORACLE_N:
        raise ValueError(f"exhaustive oracle limited to n <= {MAX_ORACLE_N}, got n = {J.n}")
    if J.size > MAX_COMPONENTS:
        raise ValueError(f"prior has {J.size} components, limit is {MAX_COMPONENTS}")


@dataclass
class OutcomeStats:
    """Per-outcome sums ``sum_c w_c E_c[. P(i,j|x,y)]`` for a joint prior.

    ``den[i, j]`` is the evidence, ``p1`` the same with ``x.y`` inserted and
    ``p2`` with ``(x.y)^2``. Any ``Evaluation`` is a linear map of these.
    """

    n: int
    den: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    @classmethod
    def compute(cls, J: JointDistribution, k: float) -> "OutcomeStats":
        _check_size(J)
        k = check_k(k)
        Zx, Ax, Bx = moment_tables(*J.x_bounds, k)
        Zy, Ay, By = moment_tables(*J.y_bounds, k)
        w = J.weights
        den = np.einsum("c,ci,cj->ij", w, Zx, Zy)
        p1 = np.einsum("c,cil,cjl->ij", w, Ax, Ay)
        C, O, n, _ = Bx.shape
        p2 = np.einsum("c,cif,cjf->ij", w, Bx.reshape(C, O, n * n), By.reshape(C, O, n * n))
        return cls(J.n, den, p1, p2)

    def first(self, phi: Evaluation) -> np.ndarray:
        return phi.scale * self.p1 / self.n + phi.offset * self.den

    def second(self, phi: Evaluation) -> np.ndarray:
        s, c = phi.scale, phi.offset
        return s * s * self.p2 / self.n ** 2 + 2 * s * c * self.p1 / self.n + c * c * self.den

    def mse(self, table: np.ndarray, phi: Evaluation) -> float:
        val = np.sum(self.second(phi) - 2 * table * self.first(phi) + table * table * self.den)
        return float(max(val, 0.0))


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True, eq=False)
class StrategyTable:
    """Estimate for every outcome pair, indexed ``values[index(i), index(j)]``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        size = 1 << self.n
        if v.shape != (size, size):
            raise ValueError(f"table must have shape {(size, size)}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def lookup(self, i, j) -> float:
        return float(self.values[outcome_index(as_bits(i, self.n)), outcome_index(as_bits(j, self.n))])

    def shifted(self, c: float) -> "StrategyTable":
        return StrategyTable(self.n, self.values + c)

    @classmethod
    def from_function(cls, n: int, fn) -> "StrategyTable":
        outs = outcomes(n)
        return cls(n, [[fn(i, j) for j in outs] for i in outs])

    @classmethod
    def from_dict(cls, n: int, estimates: dict) -> "StrategyTable":
        """Build from ``{(i_tuple, j_tuple): value}``; every key must be present."""
        outs = [tuple(int(b) for b in o) for o in outcomes(n)]
        missing = [(i, j) for i in outs for j in outs if (i, j) not in estimates]
        if missing:
            raise KeyError(f"strategy table missing {len(missing)} outcome keys, e.g. {missing[0]}")
        return cls(n, [[estimates[(i, j)] for j in outs] for i in outs])

    def as_dict(self) -> dict:
        outs = [tuple(int(b) for b in o) for o in outcomes(self.n)]
        return {(i, j): float(self.values[a, b]) for a, i in enumerate(outs) for b, j in enumerate(outs)}

    def to_json(self) -> dict:
        return {"n": self.n, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "StrategyTable":
        return cls(int(doc["n"]), doc["values"])


def omega_t_table(n: int, k: float) -> StrategyTable:
    """The unbiased estimator ``k^2 i.j / n`` as a table."""
    outs = outcomes(n).astype(np.float64)
    return StrategyTable(n, check_k(k) ** 2 * (outs @ outs.T) / n)


def posterior_mean(J: JointDistribution, i, j, k: float, phi: Evaluation = PHI) -> float:
    """``E[phi(x, y) | i, j]`` under prior ``J``.

    Raises
    ------
    ZeroEvidenceError
        If ``(i, j)`` has zero probability under ``J``.
    """
    i = as_bits(i, J.n)
    j = as_bits(j, J.n)
    stats = OutcomeStats.compute(J, k)
    a, b = outcome_index(i), outcome_index(j)
    den = stats.den[a, b]
    if den <= 0:
        raise ZeroEvidenceError(f"outcome {i.tolist()}, {j.tolist()} has zero evidence")
    return float(stats.first(phi)[a, b] / den)


def _mmse_from_stats(stats: OutcomeStats, J: JointDistribution, phi: Evaluation):
    num = stats.first(phi)
    table = np.full_like(stats.den, J.prior_mean(phi))
    ok = stats.den > 0
    table[ok] = num[ok] / stats.den[ok]
    return StrategyTable(J.n, table), stats.mse(table, phi)


def mmse_strategy(J: JointDistribution, k: float, phi: Evaluation = PHI):
    """Posterior-mean table and its mean squared error.

    Outcomes with zero evidence get the prior mean of ``phi``.
    """
    return _mmse_from_stats(OutcomeStats.compute(J, k), J, phi)


def strategy_mse(table: StrategyTable, J: JointDistribution, k: float, phi: Evaluation = PHI) -> float:
    """Exact ``E[(omega(i,j) - phi(x,y))^2]`` over the prior and the channel."""
    if table.n != J.n:
        raise ValueError("table and prior disagree on n")
    return OutcomeStats.compute(J, k).mse(table.values, phi)


# ---------------------------------------------------------------------------
# reports


def _num(x):
    """JSON-safe number: NaN becomes null, infinities become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class DegradationReport:
    mse_unbiased: float
    mmse: float
    ratio: float | None
    flags: list = field(default_factory=list)

    @property
    def is_degradation(self) -> bool:
        return "degradation" in self.flags

    def to_json(self) -> dict:
        return {"mse_unbiased": self.mse_unbiased, "mmse": self.mmse, "ratio": _num(self.ratio), "flags": list(self.flags)}


DEGENERATE_TOL = 1e-15


def check_degradation(J: JointDistribution, k: float, phi: Evaluation = PHI) -> DegradationReport:
    """Compare the unbiased estimator's MSE with the Bayes-optimal MSE."""
    stats = OutcomeStats.compute(J, k)
    table = omega_t_table(J.n, k).values * phi.scale + phi.offset
    mse_u = stats.mse(table, phi)
    _, mmse = _mmse_from_stats(stats, J, phi)
    if mmse <= DEGENERATE_TOL:
        return DegradationReport(mse_u, mmse, None, ["degenerate"])
    ratio = mse_u / mmse
    return DegradationReport(mse_u, mmse, ratio, ["degradation"] if ratio > 1 else [])


def _closed(G: Sequence[tuple]) -> bool:
    keys = {(a.mapping, b.mapping) for a, b in G}
    for a1, b1 in G:
        for a2, b2 in G:
            if (a1.compose(a2).mapping, b1.compose(b2).mapping) not in keys:
                return False
    return True


def common_permutation_group(n: int) -> list:
    """``{(sigma, sigma)}``: the same coordinate permutation on x and y."""
    return [(s, s) for s in all_permutations(n)]


def group_average(J: JointDistribution, G: Sequence[tuple]) -> JointDistribution:
    """``(1/|G|) sum_tau J o tau`` for a finite group of permutation pairs."""
    G = list(G)
    if not G:
        raise ValueError("group must be non-empty")
    if not _closed(G):
        raise ValueError("G is not closed under composition")
    avg = JointDistribution.mixture([J.permuted(a, b) for a, b in G]).merged()
    return avg


@dataclass
class IndistReport:
    lhs: float
    rhs: float
    ratio: float | None
    alpha: float
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.ratio is not None and self.ratio > self.alpha

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": _num(self.ratio),
            "alpha": self.alpha,
            "pass": self.passed,
            "flags": list(self.flags),
        }


def check_indistinguishability(
    family: Sequence[JointDistribution], k: float, phi: Evaluation = PHI, alpha: float = 1.0
) -> IndistReport:
    """Ratio of the mixture MMSE to the average per-member MMSE."""
    if not 1 <= len(family) <= 16:
        raise ValueError("family size must be between 1 and 16")
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    members = [mmse_strategy(J, k, phi)[1] for J in family]
    _, lhs = mmse_strategy(JointDistribution.mixture(list(family)), k, phi)
    rhs = float(np.mean(members))
    flags = []
    if min(members) <= DEGENERATE_TOL:
        flags.append("degenerate")
    if rhs <= DEGENERATE_TOL:
        ratio = math.inf if lhs > DEGENERATE_TOL else None
    else:
        ratio = lhs / rhs
    return IndistReport(lhs, rhs, ratio, float(alpha), flags)
