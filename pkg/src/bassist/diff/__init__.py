"""
Unified diff handling: parsing, serialization, application and change runs.
"""

from .unidiff import DiffLine, FileDiff, Hunk, LineKind, UnifiedDiff
from .unidiff import parse_unidiff, serialize_unidiff
from .patch import ChangeRun, FileLines
from .patch import (apply_change_runs, apply_patch, extract_change_runs,
                    make_unified_diff)

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

__all__ = [
    'ChangeRun', 'DiffLine', 'FileDiff', 'FileLines', 'Hunk', 'LineKind',
    'UnifiedDiff', 'apply_change_runs', 'apply_patch', 'extract_change_runs',
    'make_unified_diff', 'parse_unidiff', 'serialize_unidiff',
]
