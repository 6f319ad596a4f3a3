"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (a pure-Python
backend is selected at import time), so a failed native build only costs
speed.  We therefore treat the extension as best-effort: if Cython or a C
compiler is missing, fall back to a pure-Python install instead of
aborting.
"""

import sys
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - degraded build environment
    numpy = None
    cythonize = None


class optional_build_ext(build_ext):
    """build_ext that downgrades native-build failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover
            warnings.warn(f"compiled backend skipped ({exc}); "
                          "using the pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            warnings.warn(f"compiled backend {ext.name} skipped ({exc}); "
                          "using the pure-Python fallback")


if cythonize is not None:
    # -O2 globally; the hot loops opt into O3/vectorization per function
    # inside _fast.pyx.  Never -ffast-math: results must track the
    # pure-Python backend to tight tolerances, so IEEE semantics stay
    # intact (-fno-math-errno only drops errno bookkeeping).
    cc_args = [] if sys.platform == "win32" else ["-O2", "-fno-math-errno"]
    extensions = cythonize(
        [
            Extension(
                "hofm.backend._fast",
                ["src/hofm/backend/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=cc_args,
            )
        ],
        language_level="3",
    )
else:  # pragma: no cover
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
