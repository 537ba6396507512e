"""Build hook for the optional compiled contraction kernels.

The package works without the extension; if Cython or a C compiler is
missing the build falls back to the pure-Python kernels at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dgsa._ckernels",
                ["src/dgsa/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # pragma: no cover - build-environment dependent
    ext_modules = []

setup(ext_modules=ext_modules)
