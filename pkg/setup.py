import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Cython extensions require a setup.py alongside pyproject.toml.
extensions = [
    Extension(
        "noisy_extremes._core._kernels",
        ["src/noisy_extremes/_core/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FMA contraction: keeps results bit-identical to the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
