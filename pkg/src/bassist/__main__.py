"""
Allows ``python -m bassist``.
"""

import sys

from .app import main

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

sys.exit(main())
