"""Bernoulli degradation channel: ``x -> x/k -> i ~ Bernoulli(x/k)``."""

import numpy as np

from .core import as_vector


def check_k(k: float) -> float:
    k = float(k)
    if not np.isfinite(k) or k < 1.0:
        raise ValueError(f"degradation factor must satisfy k >= 1, got {k}")
    return k


def as_bits(i, n: int | None = None) -> np.ndarray:
    arr = np.asarray(i)
    if arr.ndim != 1:
        raise ValueError("bit vector must be 1-D")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit vector entries must be exactly 0 or 1")
    if n is not None and arr.size != n:
        raise ValueError(f"length mismatch: expected {n}, got {arr.size}")
    return arr.astype(np.uint8)


def degrade_params(x, k: float) -> np.ndarray:
    """Divide every coordinate by ``k``."""
    return as_vector(x) / check_k(k)


def bernoulli_draw(p, rng) -> np.ndarray:
    """Independent bits with ``P(bit_l = 1) = p_l``."""
    p = as_vector(p)
    return (rng.random(p.size) < p).astype(np.uint8)


def likelihood(i, x, k: float) -> float:
    """``prod_l (x_l/k)^{i_l} (1 - x_l/k)^{1 - i_l}``."""
    x = as_vector(x)
    i = as_bits(i, x.size)
    p = x / check_k(k)
    return float(np.prod(np.where(i == 1, p, 1.0 - p)))


def omega_T(i, j, k: float) -> float:
    """Unbiased estimator ``k^2 (i . j) / n`` of ``x . y / n``."""
    i = as_bits(i)
    j = as_bits(j, i.size)
    k = check_k(k)
    return float(k * k * np.dot(i.astype(np.int64), j.astype(np.int64)) / i.size)


def outcomes(n: int) -> np.ndarray:
    """All ``2**n`` bit vectors; row ``o`` has bit l equal to ``(o >> l) & 1``."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.uint8)


def outcome_index(i) -> int:
    i = np.asarray(i, dtype=np.int64)
    return int(np.sum(i << np.arange(i.size)))


def likelihood_matrix(points, k: float) -> np.ndarray:
    """``P(i | x)`` for every row ``x`` of ``points`` and every outcome."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64)) / check_k(k)
    outs = outcomes(pts.shape[1])
    return np.prod(np.where(outs[None, :, :] == 1, pts[:, None, :], 1.0 - pts[:, None, :]), axis=2)
