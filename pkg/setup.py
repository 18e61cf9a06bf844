"""Builds the optional compiled frame codec.

The package is fully functional without the extension; flexctl.wire.framing
falls back to the pure-Python codec when the import fails. Set
FLEXCTL_NO_EXT=1 to skip compilation entirely.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FLEXCTL_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "flexctl.wire._framing",
                    ["src/flexctl/wire/_framing.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
