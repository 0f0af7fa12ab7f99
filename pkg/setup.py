"""Build hook for the optional compiled kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the quadrature and density evaluation
hot paths about an order of magnitude faster.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "hardybounds._kernel",
                ["src/hardybounds/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
