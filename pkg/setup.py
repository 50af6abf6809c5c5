import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# no FMA contraction: the compiled kernel must match the numpy fallback bit for bit
ext = Extension(
    "collapse_lab.kernels._ckernel",
    ["src/collapse_lab/kernels/_ckernel.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
