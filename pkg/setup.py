from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [Extension("hydrobc._ckernels", ["src/hydrobc/_ckernels.pyx"])]

setup(ext_modules=cythonize(extensions, language_level=3))
