"""Build the optional compiled kernel core.

The package works without it (pure-Python kernels are the import-time
fallback).  Build the extension in place with:

    python setup.py build_ext --inplace

or let ``pip install -e . --no-build-isolation`` do it.  Set
NODECLF_SKIP_EXT=1 to install without attempting the extension build.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("NODECLF_SKIP_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "nodeclf._core",
                    sources=["src/nodeclf/_core.pyx"],
                    extra_compile_args=["-O3"],
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

setup(ext_modules=ext_modules)
