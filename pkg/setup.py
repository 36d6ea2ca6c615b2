import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "sfcdd._sfc_core",
        ["src/sfcdd/_sfc_core.pyx"],
        include_dirs=[np.get_include(), "src/sfcdd"],
        language="c++",
        extra_compile_args=["-O3", "-std=c++17"],
    )
]

# The extension is optional: sfcdd.sfc falls back to a numpy implementation
# when it is missing.
setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
