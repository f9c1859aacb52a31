"""Build script for the optional compiled clustering kernels.

The package works without the extension (a numpy fallback is selected at
import time), so the extension is marked optional: a failed compile does
not fail the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "pushcen._ckernels",
                ["src/pushcen/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
