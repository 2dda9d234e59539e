"""Build script for the optional Cython simulation kernel.

The package works without the compiled extension; ``locallqr.kernels``
falls back to a NumPy implementation when ``locallqr._simkernel`` cannot
be imported.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("LOCALLQR_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "locallqr._simkernel",
                    ["src/locallqr/_simkernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
