import os

from setuptools import setup

PYX = "src/splicegan/_kernels.pyx"

ext_modules = []
if os.environ.get("SPLICEGAN_PURE_PYTHON") != "1" and os.path.exists(PYX):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize([PYX], language_level=3)
        # -ffp-contract=off keeps the compiled lane bit-identical to the
        # NumPy lane (no fused multiply-add reassociation).
        for ext in ext_modules:
            ext.extra_compile_args = ["-O3", "-ffp-contract=off"]
    except ImportError:
        pass

setup(ext_modules=ext_modules)
