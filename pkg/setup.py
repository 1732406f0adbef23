import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    # IEEE semantics on purpose: no -ffast-math, no FMA contraction, so the
    # compiled kernel tracks the numpy fallback bit-for-bit where possible.
    ext_modules = cythonize(
        [
            Extension(
                "imcflow._kernels",
                ["src/imcflow/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
