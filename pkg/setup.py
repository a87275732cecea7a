"""Build script: compiles the optional C kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the compiled core exists because the training loop
is the hot path.  Build failures therefore degrade to a warning, and
aggressive architecture flags are retried without `-march=native` first.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build-time guard
    cythonize = None


# -fno-wrapv overrides the interpreter's default -fwrapv, which defeats
# induction-variable optimization in the int64-indexed reduction loops.
BASE_ARGS = ["-O3", "-funroll-loops", "-std=c99", "-fno-wrapv"]
NATIVE_ARGS = ["-march=native"]
OMP_ARGS = ["-fopenmp"]


class OptionalBuildExt(build_ext):
    """Try native+OpenMP flags, then plain -O3, then give up gracefully."""

    def build_extension(self, ext):
        flag_sets = [
            (BASE_ARGS + NATIVE_ARGS + OMP_ARGS, OMP_ARGS),
            (BASE_ARGS + OMP_ARGS, OMP_ARGS),
            (BASE_ARGS, []),
        ]
        last_err = None
        for cargs, largs in flag_sets:
            ext.extra_compile_args = cargs
            ext.extra_link_args = largs
            try:
                super().build_extension(ext)
                return
            except Exception as err:  # noqa: BLE001 - degrade, never block install
                last_err = err
        print(
            f"warning: compiled kernels unavailable ({last_err}); "
            "the pure-Python backend will be used",
            file=sys.stderr,
        )

    def run(self):
        try:
            super().run()
        except Exception as err:  # noqa: BLE001
            print(
                f"warning: skipping extension build entirely ({err})",
                file=sys.stderr,
            )


if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "volterra._kernels",
                sources=["src/volterra/_kernels.pyx"],
                include_dirs=["src/volterra"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
else:  # pragma: no cover
    extensions = []
    print("warning: Cython not available; building without compiled kernels", file=sys.stderr)

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
