"""Builds the optional Cython rasterizer kernel.

The package works without the extension: cadmatch.render falls back to the
numpy kernel when the compiled module is absent.
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "cadmatch.render._rasterkern",
                ["src/cadmatch/render/_rasterkern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
