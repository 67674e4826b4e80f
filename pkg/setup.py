"""Builds the optional compiled kernel extension.

The package is fully functional without it (a numpy fallback is selected at
import time); the extension is compiled when Cython and numpy are available.
Set NEURODEC_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("NEURODEC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "neurodec.kernels._conv",
                    ["src/neurodec/kernels/_conv.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
