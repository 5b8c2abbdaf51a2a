"""Parameter vectors, permutations, box-mixture distributions and symmetry tools.

Conventions
-----------
* Vectors are 1-D float arrays with coordinates in [0, 1].
* A :class:`Permutation` stores a 0-based mapping; ``apply(sigma, v)[l] ==
  v[sigma[l]]``. Serialized forms are 1-based.
* ``compose(p, q)`` is the permutation whose action equals applying ``q``
  first and then ``p``: ``apply(compose(p, q), v) == apply(p, apply(q, v))``.
* A :class:`DiscreteDistribution` is a finite mixture of axis-aligned
  uniform cubes ``center +/- width/2`` clipped to the unit cube. Width 0
  is a point mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .kernels import coordinate_moments

WEIGHT_TOL = 1e-12
MAX_ENUM_N = 8
MAX_REFINEMENT_CELLS = 4_000_000


def as_vector(v, n: int | None = None) -> np.ndarray:
    """Validate and return a parameter vector as a float array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("parameter vector must be 1-D and non-empty")
    if n is not None and arr.size != n:
        raise ValueError(f"expected length {n}, got {arr.size}")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValueError("parameter vector coordinates must lie in [0, 1]")
    return arr


def evaluate_phi(x, y) -> float:
    """Normalized scalar product ``x . y / n``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x, y) / x.size)


# ---------------------------------------------------------------------------
# permutations


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``{0, ..., n-1}`` acting on vectors by ``v -> v[mapping]``."""

    mapping: tuple

    def __post_init__(self):
        raw = self.mapping
        m = tuple(raw.tolist()) if isinstance(raw, np.ndarray) else tuple(int(t) for t in raw)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a permutation: {self.mapping!r}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "Permutation":
        m = list(range(n))
        m[a], m[b] = m[b], m[a]
        return cls(tuple(m))

    @classmethod
    def from_one_based(cls, seq: Iterable[int]) -> "Permutation":
        return cls(tuple(int(t) - 1 for t in seq))

    @classmethod
    def random(cls, n: int, rng) -> "Permutation":
        return cls(tuple(rng.permutation(n)))

    @property
    def n(self) -> int:
        return len(self.mapping)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.int64)

    def one_based(self) -> list:
        return [t + 1 for t in self.mapping]

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.n:
            raise ValueError(f"length mismatch: permutation of {self.n}, vector of {v.shape[-1]}")
        return v[..., self.array]

    def compose(self, other: "Permutation") -> "Permutation":
        if other.n != self.n:
            raise ValueError("cannot compose permutations of different sizes")
        return Permutation(other.array[self.array])

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.array))

    def is_identity(self) -> bool:
        return self.mapping == tuple(range(self.n))

    def __len__(self):
        return self.n


def apply_permutation(sigma: Permutation, v) -> np.ndarray:
    return sigma.apply(v)


def compose(p: Permutation, q: Permutation) -> Permutation:
    return p.compose(q)


def invert(p: Permutation) -> Permutation:
    return p.inverse()


def all_permutations(n: int):
    """Every permutation of size n, lexicographic by mapping."""
    return [Permutation(p) for p in itertools.permutations(range(n))]


# ---------------------------------------------------------------------------
# distributions


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Weighted mixture of uniform boxes (width 0 = Dirac) on ``[0, 1]^n``."""

    weights: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        c = np.array(self.centers, dtype=np.float64)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        h = np.array(self.widths, dtype=np.float64).reshape(-1)
        if h.size == 1 and w.size > 1:
            h = np.full(w.size, h[0])
        if not (w.size == c.shape[0] == h.size) or w.size == 0:
            raise ValueError("weights, centers and widths must describe the same components")
        if np.any(w <= 0):
            raise ValueError("component weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        if np.any(h < 0):
            raise ValueError("widths must be non-negative")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("component centers must lie in [0, 1]^n")
        object.__setattr__(self, "weights", _readonly(w / w.sum()))
        object.__setattr__(self, "centers", _readonly(c))
        object.__setattr__(self, "widths", _readonly(h))

    # constructors -----------------------------------------------------------

    @classmethod
    def dirac(cls, x) -> "DiscreteDistribution":
        x = as_vector(x)
        return cls(np.ones(1), x.reshape(1, -1), np.zeros(1))

    @classmethod
    def box(cls, center, width: float) -> "DiscreteDistribution":
        c = as_vector(center)
        return cls(np.ones(1), c.reshape(1, -1), np.array([float(width)]))

    @classmethod
    def uniform(cls, n: int) -> "DiscreteDistribution":
        return cls.box(np.full(n, 0.5), 1.0)

    @classmethod
    def mixture(cls, parts: Sequence["DiscreteDistribution"], weights=None) -> "DiscreteDistribution":
        if weights is None:
            weights = np.full(len(parts), 1.0 / len(parts))
        ws = np.concatenate([wt * p.weights for wt, p in zip(weights, parts)])
        cs = np.concatenate([p.centers for p in parts])
        hs = np.concatenate([p.widths for p in parts])
        return cls(ws, cs, hs)

    # geometry ---------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def lo(self) -> np.ndarray:
        return np.clip(self.centers - 0.5 * self.widths[:, None], 0.0, 1.0)

    @property
    def hi(self) -> np.ndarray:
        return np.clip(self.centers + 0.5 * self.widths[:, None], 0.0, 1.0)

    def component_means(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def mean(self) -> np.ndarray:
        return self.weights @ self.component_means()

    def second_moment(self) -> np.ndarray:
        """``E[x x^T]`` computed exactly from the box components."""
        m1, m2, _ = coordinate_moments(self.lo, self.hi)
        outer = np.einsum("c,cl,cm->lm", self.weights, m1, m1)
        diag = self.weights @ (m2 - m1 * m1)
        return outer + np.diag(diag)

    def covariance(self) -> np.ndarray:
        mu = self.mean()
        return self.second_moment() - np.outer(mu, mu)

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        """Pick a component by weight, then a uniform point inside its box."""
        count = 1 if size is None else size
        comp = rng.choice(self.size, size=count, p=self.weights)
        lo, hi = self.lo[comp], self.hi[comp]
        pts = lo + (hi - lo) * rng.random((count, self.n))
        return pts[0] if size is None else pts

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        inside = np.all((x >= self.lo - 1e-15) & (x <= self.hi + 1e-15), axis=1)
        return bool(np.any(inside))

    # transforms -------------------------------------------------------------

    def permuted(self, sigma: Permutation) -> "DiscreteDistribution":
        """The law with density ``Phi(sigma(x))``, i.e. ``Phi o sigma``."""
        centers = sigma.inverse().apply(self.centers)
        return DiscreteDistribution(self.weights, centers, self.widths)

    def merged(self, decimals: int = 12) -> "DiscreteDistribution":
        """Sum the weights of identical components (rounded keys)."""
        keys = np.round(np.column_stack([self.centers, self.widths]), decimals)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        w = np.bincount(inverse.reshape(-1), weights=self.weights, minlength=uniq.shape[0])
        return DiscreteDistribution(w, np.clip(uniq[:, :-1], 0, 1), np.maximum(uniq[:, -1], 0))

    # serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "components": [
                {"w": float(w), "center": [float(t) for t in c], "width": float(h)}
                for w, c, h in zip(self.weights, self.centers, self.widths)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DiscreteDistribution":
        comps = doc["components"]
        dist = cls(
            [c["w"] for c in comps],
            [c["center"] for c in comps],
            [c["width"] for c in comps],
        )
        if "n" in doc and dist.n != int(doc["n"]):
            raise ValueError("declared n does not match component dimension")
        return dist


def same_distribution(a: DiscreteDistribution, b: DiscreteDistribution, tol: float = WEIGHT_TOL) -> bool:
    """Equality up to merging of identical components."""
    if a.n != b.n:
        return False
    ma, mb = a.merged(), b.merged()
    if ma.size != mb.size:
        return False
    return bool(
        np.allclose(ma.centers, mb.centers, atol=1e-12)
        and np.allclose(ma.widths, mb.widths, atol=1e-12)
        and np.allclose(ma.weights, mb.weights, atol=tol)
    )


def _check_enumerable(n: int):
    if n > MAX_ENUM_N:
        raise ValueError(f"orbit enumeration limited to n <= {MAX_ENUM_N}, got n = {n}")


def symmetric_projection(phi: DiscreteDistribution) -> DiscreteDistribution:
    """Uniform average of ``phi`` over all coordinate permutations."""
    _check_enumerable(phi.n)
    perms = np.array(list(itertools.permutations(range(phi.n))))
    centers = phi.centers[:, perms].reshape(-1, phi.n)
    weights = np.repeat(phi.weights / len(perms), len(perms))
    widths = np.repeat(phi.widths, len(perms))
    return DiscreteDistribution(weights, centers, widths).merged()


# ---------------------------------------------------------------------------
# total variation on box mixtures


def _overlap_components(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Cluster labels for boxes linked by positive-volume overlaps."""
    B = lo.shape[0]
    order = np.argsort(lo[:, 0], kind="stable")
    lo_s, hi_s = lo[order], hi[order]
    rows, cols = [], []
    for p in range(B):
        q = np.searchsorted(lo_s[:, 0], hi_s[p, 0], side="left")
        if q <= p + 1:
            continue
        cand = np.arange(p + 1, q)
        ok = np.all((lo_s[cand] < hi_s[p]) & (lo_s[p] < hi_s[cand]), axis=1)
        hit = cand[ok]
        rows.extend([p] * hit.size)
        cols.extend(hit.tolist())
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(B, B))
    _, labels_sorted = connected_components(graph, directed=False)
    labels = np.empty(B, dtype=np.int64)
    labels[order] = labels_sorted
    return labels


def _cluster_abs_integral(coef, lo, hi) -> float:
    """``int |sum_b coef_b U(box_b)|`` over one overlap cluster, exactly."""
    n = lo.shape[1]
    if coef.size == 1:
        return float(abs(coef[0]))
    bps = [np.unique(np.concatenate([lo[:, d], hi[:, d]])) for d in range(n)]
    shape = tuple(len(b) - 1 for b in bps)
    cells = math.prod(shape)
    if cells > MAX_REFINEMENT_CELLS:
        raise ValueError(f"partition refinement too large ({cells} cells)")
    vol = np.prod(hi - lo, axis=1)
    dens = coef / vol
    start = np.stack([np.searchsorted(bps[d], lo[:, d]) for d in range(n)], axis=1)
    stop = np.stack([np.searchsorted(bps[d], hi[:, d]) for d in range(n)], axis=1)
    # n-dimensional difference array: each box adds dens on [start, stop).
    diff = np.zeros(tuple(s + 1 for s in shape))
    for corner in itertools.product((0, 1), repeat=n):
        sign = (-1) ** sum(corner)
        idx = tuple(np.where(np.array(corner)[None, :] == 1, stop, start).T)
        np.add.at(diff, idx, sign * dens)
    for d in range(n):
        diff = np.cumsum(diff, axis=d)
    grid = diff[tuple(slice(0, s) for s in shape)]
    cell_vol = np.ones(shape)
    for d in range(n):
        lengths = np.diff(bps[d]).reshape([-1 if e == d else 1 for e in range(n)])
        cell_vol = cell_vol * lengths
    return float(np.sum(np.abs(grid) * cell_vol))


def total_variation(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Exact total-variation distance between two box mixtures."""
    if p.n != q.n:
        raise ValueError("dimension mismatch")
    lo = np.concatenate([p.lo, q.lo])
    hi = np.concatenate([p.hi, q.hi])
    coef = np.concatenate([p.weights, -q.weights])
    keys = np.round(np.column_stack([lo, hi]), 13)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    coef = np.bincount(inverse.reshape(-1), weights=coef, minlength=uniq.shape[0])
    lo, hi = uniq[:, : p.n], uniq[:, p.n:]
    keep = np.abs(coef) > 1e-15
    coef, lo, hi = coef[keep], lo[keep], hi[keep]
    if coef.size == 0:
        return 0.0
    atom = np.all(hi - lo <= 0, axis=1)
    total = float(np.sum(np.abs(coef[atom])))
    coef, lo, hi = coef[~atom], lo[~atom], hi[~atom]
    if coef.size:
        labels = _overlap_components(lo, hi)
        for lab in np.unique(labels):
            sel = labels == lab
            total += _cluster_abs_integral(coef[sel], lo[sel], hi[sel])
    return min(1.0, max(0.0, 0.5 * total))


def remoteness(phi: DiscreteDistribution) -> float:
    """Total-variation distance between ``phi`` and its symmetric projection."""
    if phi.n == 1:
        return 0.0
    return total_variation(phi, symmetric_projection(phi))


def remoteness_bound(phi: DiscreteDistribution, reference: "Permutation | None" = None) -> float:
    """Certified lower bound on :func:`remoteness`, usable for any n.

    Uses the linear rank statistic ``T(x) = r . x`` with centered scores
    ``r`` following the tidying order. Its first two moments are exact
    under both ``phi`` and its symmetric projection (the latter in closed
    form), and two Cantelli bounds on ``{T > t}`` lower-bound the total
    variation ``P_phi(T > t) - P_sym(T > t)``.
    """
    n = phi.n
    if n == 1:
        return 0.0
    if reference is None:
        reference = tidying_permutation(phi)
    scores = np.empty(n)
    # canonical position p holds coordinate reference.inverse()[p]
    canon = reference.inverse().array
    scores[canon] = (n - 1) / 2.0 - np.arange(n)
    m1, m2, _ = coordinate_moments(phi.lo, phi.hi)
    w = phi.weights
    proj = m1 @ scores
    e_phi = float(w @ proj)
    # scores' Cov scores, from per-component means and within-box variances
    v_phi = max(float(w @ proj ** 2 - e_phi ** 2 + w @ ((m2 - m1 * m1) @ scores ** 2)), 0.0)
    diag_sum = float(w @ m2.sum(axis=1))
    total = float(w @ (m1.sum(axis=1) ** 2 - (m1 * m1).sum(axis=1))) + diag_sum
    diag_mean = diag_sum / n
    off_mean = (total - diag_sum) / (n * (n - 1))
    v_sym = max(float(scores @ scores) * (diag_mean - off_mean), 0.0)
    if e_phi <= 0:
        return 0.0
    t = np.linspace(0.0, e_phi, 2049)[1:-1]
    gap = (e_phi - t) ** 2
    p_phi = np.where(v_phi > 0, gap / (v_phi + gap), 1.0)
    p_sym = np.where(v_sym > 0, v_sym / (v_sym + t ** 2), 0.0)
    return float(max(0.0, np.max(p_phi - p_sym)))


def tidying_permutation(phi: DiscreteDistribution) -> Permutation:
    """Permutation whose inverse sorts the mean vector in descending order.

    Ties keep the smaller original index first, so ``apply(invert(sigma),
    mean)`` is non-increasing and ``phi.permuted(sigma)`` is the canonical
    form.
    """
    mean = phi.mean()
    order = np.argsort(-mean, kind="stable")
    return Permutation(order).inverse()


def tidy_order(values) -> Permutation:
    """Tidying permutation of a plain vector (same rule as for distributions)."""
    order = np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")
    return Permutation(order).inverse()


def canonical_form(phi: DiscreteDistribution) -> DiscreteDistribution:
    return phi.permuted(tidying_permutation(phi))
