import os
import platform
import sys

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # no build toolchain: pure-Python fallback only
    ext_modules = []
else:
    cflags = ["-O3", "-fno-math-errno", "-fassociative-math", "-fno-signed-zeros", "-fno-trapping-math"]
    macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
    libs = []
    if os.environ.get("RFNAV_PORTABLE") != "1":
        cflags += ["-march=native", "-mprefer-vector-width=512"]
    if sys.platform.startswith("linux") and platform.machine() == "x86_64":
        # SIMD exp/log from glibc's libmvec
        cflags.append("-fopenmp-simd")
        macros.append(("RFNAV_VECTOR_MATH", "1"))
        libs.append("mvec")
    ext_modules = cythonize(
        [
            Extension(
                "rfnav._kernels",
                ["src/rfnav/_kernels.pyx"],
                include_dirs=[np.get_include(), "src/rfnav"],
                define_macros=macros,
                libraries=libs,
                extra_compile_args=cflags,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
