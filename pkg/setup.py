import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels must produce bit-identical floats to the
# pure-Python fallback: FMA contraction is disabled, and vectorization /
# builtin handling of sin/cos is suppressed so the compiler cannot swap
# scalar libm calls for libmvec or sincos variants that round differently.
ext = Extension(
    "v2xsim._kernels._speedups",
    ["src/v2xsim/_kernels/_speedups.pyx"],
    extra_compile_args=[
        "-O3",
        "-ffp-contract=off",
        "-fno-tree-vectorize",
        "-fno-builtin-sin",
        "-fno-builtin-cos",
        "-fno-builtin-sincos",
    ],
)
ext.optional = True  # package works without a compiler via the pure backend

if cythonize is None or os.environ.get("V2XSIM_NO_EXT"):
    ext_modules = []
else:
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
