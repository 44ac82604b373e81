from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the pure-Python kernels are used
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(
            "stieltjes._kernels",
            ["src/stieltjes/_kernels.pyx"],
            extra_compile_args=["-O2", "-ffp-contract=off"],
            optional=True,
        )],
        language_level=3,
    )

setup(ext_modules=ext_modules)
