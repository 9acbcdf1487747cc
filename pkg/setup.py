import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        name="tcnids.kernels._ckernels",
        sources=["src/tcnids/kernels/_ckernels.pyx"],
        extra_compile_args=["-O3", "-g0"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
