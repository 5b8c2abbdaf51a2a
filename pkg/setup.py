"""Build the optional Cython kernels.

The extension is marked optional: when no compiler (or no Cython) is
available the package installs anyway and ``deeprand.kernels`` falls
back to the pure-Python implementations.
"""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build-time only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "deeprand._ckernels",
                ["src/deeprand/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
