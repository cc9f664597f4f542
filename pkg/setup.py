"""Setup for bassist."""

import os
from setuptools import setup
from setuptools import find_namespace_packages

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

with open(os.path.join(os.path.dirname(__file__), 'VERSION'), 'r') as f:
    VERSION = f.read().strip()


setup(
    name='bassist',
    version=VERSION,
    description='Posts fixes produced by static analysis tools as suggested '
                'changes on pull requests.',
    author='Tiziano Bettio',
    author_email='tizilogic@gmail.com',
    packages=find_namespace_packages(where='src'),
    package_dir={'': 'src'},
    python_requires='>=3.8',
    install_requires=['plyer', 'requests>=2.22', 'tenacity>=8.0',
                      'pydantic>=2.0', 'tomli>=1.1', 'unidiff>=0.7.4'],
    extras_require={'test': ['pytest>=6.0', 'hypothesis>=6.0']},
    entry_points={'console_scripts': ['bassist=bassist.app:main']},
)
