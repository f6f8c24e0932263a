"""Build the optional compiled kernels.

The package works without them: ``georecon.kernels`` falls back to the
pure-Python implementations when the extension is missing.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GEORECON_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "georecon._ckernels",
                    ["src/georecon/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no contraction into FMA: results must match the fallback bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
