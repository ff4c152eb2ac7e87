"""Build the optional compiled delay-search kernel.

Without Cython (or a C compiler) the package installs pure-Python and
``myograph.kernels`` falls back to the NumPy implementation.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("myograph._mle_kernel", ["src/myograph/_mle_kernel.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
