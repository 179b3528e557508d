"""Build script for the optional compiled kernel.

The package works without the extension (a vectorized numpy fallback is
selected at import time); building it just makes operator assembly faster
on large spaces.  `python setup.py build_ext --inplace` or a normal
`pip install` both compile it.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # source builds without cython ship no extension
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "bosonlab._kernels_cy",
                sources=["src/bosonlab/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=extensions)
