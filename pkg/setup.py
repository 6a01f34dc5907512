"""Build script for the optional compiled Monte Carlo kernels.

The extension is a pure accelerator: if Cython or a C compiler is
unavailable the install still succeeds and the package falls back to
the numpy implementations in ``simo_prelog._kernels_py``.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "simo_prelog._kernels",
                ["src/simo_prelog/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    print(f"skipping compiled kernels ({exc}); numpy fallback will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
