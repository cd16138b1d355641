"""Build script for the optional compiled hot-kernel extension.

The package works without the extension: ``roughsmile._accel`` falls back to a
pure-numpy implementation when ``roughsmile._fastpath`` is absent, so the
extension is marked optional and a failed compile does not break the install.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # source dist without Cython: install pure-Python only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "roughsmile._fastpath",
                ["src/roughsmile/_fastpath.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
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
