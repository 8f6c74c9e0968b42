"""Build script: compiles the optional fast kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time); the build therefore tolerates a missing compiler.
"""
import sys

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hfpa._kernels",
                ["src/hfpa/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-fno-math-errno"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    print(f"hfpa: skipping compiled kernels ({exc}); pure-python fallback will be used",
          file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
