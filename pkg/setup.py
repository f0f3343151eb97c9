from setuptools import Extension, setup

# The bitmask robustness kernel is compiled when Cython is available and
# falls back to the pure-Python implementation otherwise (see
# resilient_observer._kernels).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "resilient_observer._kernels.robust_cy",
                ["src/resilient_observer/_kernels/robust_cy.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
