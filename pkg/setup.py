"""Builds the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import time),
so a missing compiler or Cython only costs speed, not functionality.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "fpbilstm.nn.kernels._ckernels",
                ["src/fpbilstm/nn/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffast-math lets gcc vectorize the gate transcendentals
                # through libmvec; parity tests pin the lanes to 1e-12
                extra_compile_args=["-O3", "-ffast-math"],
                libraries=["m"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
