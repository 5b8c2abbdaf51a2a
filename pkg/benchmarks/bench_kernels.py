"""Compare the compiled and pure-Python kernels.

Run ``python benchmarks/bench_kernels.py``. Each kernel is timed on the
same inputs for both backends and the outputs are checked for agreement.
"""

import argparse
import timeit

import numpy as np

from deeprand import kernels


def _cases(rng):
    lo = rng.random((64, 4)) * 0.5
    hi = lo + rng.random((64, 4)) * 0.5
    bits = rng.integers(0, 2, 20_000, dtype=np.uint8)
    seed = rng.integers(0, 2, 256 + bits.size - 1, dtype=np.uint8)
    a = rng.integers(0, 2, 4096, dtype=np.uint8)
    b = a.copy()
    idx = rng.permutation(4096)[:64].astype(np.int64)
    b[idx[17]] ^= 1
    return {
        "box_outcome_moments(C=64, n=4)": ("box_outcome_moments", (lo, hi, 3.0)),
        "toeplitz_hash(N=20000, m=256)": ("toeplitz_hash", (bits, seed, 256)),
        "bisect_locate(block=64)": ("bisect_locate", (a, b, idx)),
    }


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(p, q) for p, q in zip(x, y))
    if isinstance(x, np.ndarray):
        return np.allclose(x, y, rtol=1e-12, atol=1e-15)
    return x == y


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compiled_kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1
    backends = {"cython": kernels.compiled_kernels, "python": kernels.python_kernels}
    print(f"{'kernel':34s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}  agree")
    for label, (name, args_) in _cases(np.random.default_rng(0)).items():
        times, outs = {}, {}
        for b, mod in backends.items():
            fn = getattr(mod, name)
            outs[b] = fn(*args_)
            n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args_), number=1), 1e-6)))
            times[b] = min(timeit.repeat(lambda: fn(*args_), number=n, repeat=args.repeat)) / n * 1e3
        agree = _same(outs["cython"], outs["python"])
        speed = times["python"] / times["cython"]
        print(f"{label:34s} {times['cython']:10.4f} {times['python']:10.4f} {speed:8.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
