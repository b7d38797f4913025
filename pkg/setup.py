"""Build script for the optional compiled kernel extension.

The package is pure Python plus one Cython extension holding the conv
pack/unpack kernels. If the extension cannot be built (no compiler, no
Cython), installation proceeds and the numpy fallback is used at import
time instead.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Degrade to a pure-Python install when the extension fails to build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(
                f"warning: could not compile {ext.name} ({exc}); "
                "falling back to the pure numpy kernels",
                file=sys.stderr,
            )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [
        Extension(
            "sepkit.nn._kernels_ext",
            ["src/sepkit/nn/_kernels_ext.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
