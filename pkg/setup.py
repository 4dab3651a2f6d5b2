"""Build script: compiles the optional MPFR kernel extension.

The extension links against libmpfr/libgmp through gmpy2's C API. If
Cython, the headers, or a C compiler are missing the install falls back
to the pure-Python kernel lane (same results, slower).

Force the fallback with RADMOM_NO_EXT=1.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Treat extension build failures as non-fatal."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, link failure, ...
            print("radmom: skipping compiled kernels (%s)" % exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print("radmom: skipping %s (%s)" % (ext.name, exc))


ext_modules = []
cmdclass = {}
if os.environ.get("RADMOM_NO_EXT") != "1":
    try:
        import gmpy2
        from Cython.Build import cythonize

        gmpy2_dir = os.path.dirname(gmpy2.__file__)
        ext_modules = cythonize(
            [
                Extension(
                    "radmom._kernels",
                    ["src/radmom/_kernels.pyx"],
                    include_dirs=[gmpy2_dir],
                    libraries=["mpfr", "gmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
        cmdclass["build_ext"] = optional_build_ext
    except Exception as exc:
        print("radmom: compiled kernels not configured (%s)" % exc)

setup(ext_modules=ext_modules, cmdclass=cmdclass)
