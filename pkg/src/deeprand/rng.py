"""Seed derivation for reproducible, non-overlapping random streams.

Every stream is a Philox counter-based generator keyed by a SHA-256
digest of ``(master_seed, index, role)``, so runs can be generated in
any order (or concurrently) and still be bit-identical.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_key(master_seed, *labels):
    """128-bit Philox key from the master seed and any labels."""
    h = hashlib.sha256()
    h.update(str(int(master_seed) & MASK64).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    digest = h.digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(master_seed, *labels):
    """Independent generator for ``(master_seed, *labels)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *labels)))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
