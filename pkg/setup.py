import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled kernels bitwise-identical to the
# numpy fallback (no FMA contraction).  Do not add -ffast-math: reassociation
# would break the traversal/partition bitwise-identity guarantees.
extensions = [
    Extension(
        "expstencil._core",
        ["src/expstencil/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
