"""Build script for the compiled tree-edit-distance core.

The extension is optional: when Cython or a C toolchain is missing the
package installs anyway and falls back to the pure-Python kernel in
``mwpcl._ted_py`` (selected at import time by ``mwpcl.similarity``).
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing
            warnings.warn(f"compiled TED core skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled TED core skipped: {exc}")


if cythonize is not None:
    ext_modules = cythonize(
        [Extension("mwpcl._ted_core", ["src/mwpcl/_ted_core.pyx"])],
        language_level="3",
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
