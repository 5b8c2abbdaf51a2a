"""Kernel dispatch: compiled extension when importable, otherwise pure Python.

Set ``DEEPRAND_PURE_PYTHON=1`` before import to force the fallback
(used by the benchmark and by the backend-agreement tests).
"""

import os

from . import _pykernels

python_kernels = _pykernels

try:
    if os.environ.get("DEEPRAND_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as compiled_kernels
except ImportError:
    compiled_kernels = None

_active = compiled_kernels if compiled_kernels is not None else _pykernels

BACKEND = "cython" if compiled_kernels is not None else "python"

box_outcome_moments = _active.box_outcome_moments
toeplitz_hash = _active.toeplitz_hash
bisect_locate = _active.bisect_locate
coordinate_moments = _pykernels.coordinate_moments
