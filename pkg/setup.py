"""Build script: compiles the optional Cython kernel.

The extension is marked optional; when Cython or a C compiler is missing the
package installs without it and falls back to the pure-Python kernel.
"""
import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("HALPERN_CAT1_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "halpern_cat1._kernels",
                [os.path.join("src", "halpern_cat1", "_kernels.pyx")],
                extra_compile_args=["-O2"],
                optional=True,
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
