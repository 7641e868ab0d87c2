import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

NPY_RANDOM_LIB = os.path.join(os.path.dirname(np.random.__file__), "lib")

ext_modules = [
    Extension(
        name="ssggm._core",
        sources=["src/ssggm/_core.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[NPY_RANDOM_LIB],
        libraries=["npyrandom", "m"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    ),
]

setup(
    ext_modules=cythonize(
        ext_modules,
        language_level="3",
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    ),
)
