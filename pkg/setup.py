from setuptools import Extension, setup

# The scan kernel is compiled when Cython is available; without it the
# package falls back to the pure-numpy implementation selected at import.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "radscan._kernels._scan_cy",
                ["src/radscan/_kernels/_scan_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
