import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the package falls back to _core_py at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "coarsekit._core",
                ["src/coarsekit/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
