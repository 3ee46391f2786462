"""Build script: compiles the optional geometry/simulation kernels.

The compiled extension is an accelerator only. If Cython or a C compiler is
unavailable the build degrades to the pure-Python kernels in
``igekit._kernels_py`` (selected at import time by ``igekit.kernels``).
"""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/igekit/_kernels.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"igekit: skipping compiled kernels ({exc}); "
                     "pure-Python fallback will be used\n")

setup(ext_modules=ext_modules)
