"""Reference (numpy / pure-Python) implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same
signature and the same results; ``deeprand.kernels`` picks one at import.
"""

import numpy as np


def coordinate_moments(lo, hi):
    """Raw moments E[x], E[x^2], E[x^3] of uniform laws on [lo, hi].

    ``lo == hi`` gives the moments of a point mass, so Dirac components
    need no special casing.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    m1 = 0.5 * (lo + hi)
    m2 = (lo * lo + lo * hi + hi * hi) / 3.0
    m3 = 0.25 * (lo + hi) * (lo * lo + hi * hi)
    return m1, m2, m3


def box_outcome_moments(lo, hi, k):
    """Likelihood-weighted moments of product boxes for every outcome.

    Parameters
    ----------
    lo, hi : ndarray, shape (C, n)
        Per-coordinate interval bounds of C product-uniform components.
    k : float
        Degradation factor; the channel draws bit l with probability x_l / k.

    Returns
    -------
    Z : ndarray, shape (C, 2**n)
        ``E[P(i|x)]`` for each component and outcome ``i``.
    A : ndarray, shape (C, 2**n, n)
        ``E[x_l P(i|x)]``.
    B : ndarray, shape (C, 2**n, n, n)
        ``E[x_l x_m P(i|x)]``.

    Outcome ``o`` has bit ``l`` equal to ``(o >> l) & 1``.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_2d(np.asarray(hi, dtype=np.float64))
    C, n = lo.shape
    n_out = 1 << n
    m1, m2, m3 = coordinate_moments(lo, hi)
    inv_k = 1.0 / k
    # e_r[c, l, bit] = E[x^r P(bit | x)]
    e0 = np.stack([1.0 - m1 * inv_k, m1 * inv_k], axis=-1)
    e1 = np.stack([m1 - m2 * inv_k, m2 * inv_k], axis=-1)
    e2 = np.stack([m2 - m3 * inv_k, m3 * inv_k], axis=-1)

    bits = (np.arange(n_out)[:, None] >> np.arange(n)[None, :]) & 1  # (O, n)
    cols = np.arange(n)[None, :]
    E0 = e0[:, cols, bits]  # (C, O, n)
    E1 = e1[:, cols, bits]
    E2 = e2[:, cols, bits]

    Z = np.prod(E0, axis=2)
    A = np.empty((C, n_out, n))
    B = np.empty((C, n_out, n, n))
    for l in range(n):
        rest_l = np.prod(np.delete(E0, l, axis=2), axis=2)
        A[:, :, l] = E1[:, :, l] * rest_l
        B[:, :, l, l] = E2[:, :, l] * rest_l
        for m in range(l + 1, n):
            rest_lm = np.prod(np.delete(E0, [l, m], axis=2), axis=2)
            val = E1[:, :, l] * E1[:, :, m] * rest_lm
            B[:, :, l, m] = val
            B[:, :, m, l] = val
    return Z, A, B


def toeplitz_hash(bits, seed, out_len):
    """Multiply ``bits`` by the binary Toeplitz matrix built from ``seed``.

    Row r, column c of the matrix is ``seed[r - c + N - 1]`` where
    ``N = len(bits)``; ``seed`` must hold ``out_len + N - 1`` bits.
    """
    bits = np.asarray(bits, dtype=np.int64)
    seed = np.asarray(seed, dtype=np.int64)
    N = bits.shape[0]
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    conv = np.convolve(seed, bits)
    return (conv[N - 1:N - 1 + out_len] & 1).astype(np.uint8)


def bisect_locate(a, b, idx):
    """Binary search for one mismatch inside a block of odd parity difference.

    ``idx`` lists the positions of the block (in shuffled order). Each
    halving reveals one parity of the left half. Returns the located
    position and the number of parities revealed.
    """
    lo, hi = 0, len(idx)
    revealed = 0
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        diff = 0
        for t in range(lo, mid):
            p = idx[t]
            diff ^= int(a[p]) ^ int(b[p])
        revealed += 1
        if diff:
            hi = mid
        else:
            lo = mid
    return int(idx[lo]), revealed
