"""Build script: compiles the optional word-kernel extension.

The package works without the extension (a pure-Python kernel is selected at
import time); set SURFCOCYCLE_NO_EXT=1 to skip compilation explicitly.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SURFCOCYCLE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "surfcocycle._wordcore_c",
                    ["src/surfcocycle/_wordcore_c.pyx"],
                    extra_compile_args=["-O2"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
