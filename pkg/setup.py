import os

import numpy as np
from setuptools import Extension, setup

ext_kwargs = dict(
    include_dirs=[np.get_include()],
    # no FMA contraction: the compiled kernels must match the numpy fallback bit for bit
    extra_compile_args=["-O3", "-ffp-contract=off"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

ext_modules = []
if os.environ.get("STOCHTEX_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("stochtex._core", ["src/stochtex/_core.pyx"], **ext_kwargs)],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython not available; installing the pure-Python backend only")

setup(ext_modules=ext_modules)
