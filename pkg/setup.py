"""Builds the optional Cython clipping kernel.

The package works without it (a NumPy fallback is selected at import),
so a failed extension build only costs speed.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fbms._kernels._clip_cy",
                ["src/fbms/_kernels/_clip_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
