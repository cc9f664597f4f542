"""
Patch application and change-run extraction: the line-coordinate algebra
used by every downstream module.
"""

from dataclasses import dataclass
import difflib
from typing import Iterable, List, Optional, Sequence, Tuple

from .unidiff import DEV_NULL, NO_NEWLINE, FileDiff, LineKind
from ..tools.common import ContextMismatch

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


class FileLines(list):
    """
    ``list`` of line texts (without newline characters) that remembers
    whether the content ended with a newline, so conversions to and from text
    are byte exact.

    Args:
        lines: Optional ``Iterable[str]`` -> the lines.
        final_newline: Optional ``bool`` -> whether the last line is
            terminated by a newline.
    """
    def __init__(self, lines: Iterable[str] = (), final_newline: bool = True):
        super().__init__(lines)
        self.final_newline = final_newline

    @classmethod
    def from_text(cls, text: str) -> 'FileLines':
        """Splits ``text`` on LF; a trailing CR stays part of the line."""
        if not text:
            return cls()
        lines = text.split('\n')
        if lines[-1] == '':
            lines.pop()
            return cls(lines, True)
        return cls(lines, False)

    def to_text(self) -> str:
        """Joins the lines back into the exact original text."""
        if not self:
            return ''
        return '\n'.join(self) + ('\n' if self.final_newline else '')

    def __eq__(self, other):
        if isinstance(other, FileLines):
            return list.__eq__(self, other) \
                and self.final_newline == other.final_newline
        return list.__eq__(self, other)

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __repr__(self):
        return f'FileLines({list.__repr__(self)}, ' \
               f'final_newline={self.final_newline})'


def _final_newline(base: Sequence[str]) -> bool:
    return getattr(base, 'final_newline', True)


@dataclass(frozen=True)
class ChangeRun:
    """
    A maximal consecutive sequence of changed lines in one hunk.

    ``start..end`` is the inclusive pre-patch line range the run replaces. A
    pure insertion has an empty range (``end == start - 1``) and inserts
    after line ``end``, ``0`` meaning the top of the file.
    """
    file: str
    start: int
    end: int
    replacement: Tuple[str, ...]
    removed: Tuple[str, ...] = ()
    touches_eof: bool = False
    run_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'replacement', tuple(self.replacement))
        object.__setattr__(self, 'removed', tuple(self.removed))
        if self.end < self.start - 1 or self.start < 1:
            raise ValueError(f'invalid run range {self.start}..{self.end}')

    @property
    def is_insertion(self) -> bool:
        """``bool`` -> whether the run only inserts lines."""
        return self.end < self.start

    @property
    def insert_after(self) -> int:
        """``int`` -> for insertions, the line after which lines go."""
        return self.end

    @property
    def old_range(self) -> range:
        """``range`` -> the replaced pre-patch line numbers."""
        return range(self.start, self.end + 1)


def apply_patch(base: Sequence[str], file_diff: FileDiff) -> FileLines:
    """
    Applies all hunks of ``file_diff`` to ``base``. Context and removed lines
    have to match exactly, there is no fuzz factor.

    Args:
        base: ``Sequence[str]`` -> file content as lines. When a
            :class:`FileLines` is passed, the final newline state is honored
            and checked against ``\\ No newline at end of file`` markers.
        file_diff: :class:`~bassist.diff.unidiff.FileDiff`

    Returns:
        :class:`FileLines` -> the patched content.

    Raises:
        ContextMismatch: if ``base`` differs from what the patch expects.
    """
    result: List[str] = []
    final_newline = _final_newline(base)
    pos = 0
    for hunk in file_diff.hunks:
        first, _ = hunk.old_span
        if first < pos or first > len(base):
            raise ContextMismatch(f'{file_diff.path}: hunk {hunk.header} lies '
                                  f'outside of the file.')
        result.extend(base[pos:first])
        pos = first
        last_old = last_new = None
        for line in hunk.lines:
            if line.old_side:
                if pos >= len(base) or base[pos] != line.text:
                    raise ContextMismatch(
                        f'{file_diff.path}:{pos + 1}: expected '
                        f'{line.text!r}, found '
                        f'{base[pos] if pos < len(base) else "end of file"!r}'
                    )
                pos += 1
                last_old = line
            if line.new_side:
                result.append(line.text)
                last_new = line
        if pos == len(base):
            if last_old is not None and isinstance(base, FileLines) \
                    and last_old.no_newline_at_eof == base.final_newline:
                raise ContextMismatch(f'{file_diff.path}: final newline '
                                      f'differs from the patch.')
            if last_new is not None:
                final_newline = not last_new.no_newline_at_eof
    result.extend(base[pos:])
    return FileLines(result, final_newline or not result)


def extract_change_runs(file_diff: FileDiff) -> List[ChangeRun]:
    """
    Splits every hunk into its maximal runs of non-context lines.

    Args:
        file_diff: :class:`~bassist.diff.unidiff.FileDiff`

    Returns:
        ``List[ChangeRun]`` -> runs in file order, in pre-patch coordinates.
    """
    runs = []
    for hunk in file_diff.hunks:
        old_line = hunk.old_start if hunk.old_count else hunk.old_start + 1
        start = None
        removed: List[str] = []
        added: List[str] = []
        eof = False
        for line in hunk.lines + (None, ):
            if line is None or line.kind is LineKind.CONTEXT:
                if start is not None:
                    runs.append(ChangeRun(file_diff.path, start, old_line - 1,
                                          tuple(added), tuple(removed), eof))
                    start, removed, added, eof = None, [], [], False
                old_line += 1
                continue
            if start is None:
                start = old_line
            eof = eof or line.no_newline_at_eof
            if line.kind is LineKind.REMOVE:
                removed.append(line.text)
                old_line += 1
            else:
                added.append(line.text)
    return runs


def apply_change_runs(base: Sequence[str],
                      runs: Iterable[ChangeRun]) -> FileLines:
    """
    Replays ``runs`` onto ``base`` bottom-up, replacing each run's range with
    its replacement.

    Args:
        base: ``Sequence[str]`` -> file content as lines.
        runs: ``Iterable[ChangeRun]`` -> non-overlapping runs of one file.

    Returns:
        :class:`FileLines`
    """
    lines = list(base)
    for run in sorted(runs, key=lambda r: (r.start, r.end), reverse=True):
        lines[run.start - 1:run.end] = run.replacement
    return FileLines(lines, _final_newline(base))


def _terminated(lines: Sequence[str]) -> List[str]:
    result = [f'{line}\n' for line in lines]
    if result and not _final_newline(lines):
        result[-1] = result[-1][:-1]
    return result


def make_unified_diff(path: str, old: Optional[Sequence[str]],
                      new: Optional[Sequence[str]], context: int = 3) -> str:
    """
    Diffs two versions of a file with :mod:`difflib`, emitting ``\\ No
    newline at end of file`` markers where needed.

    Args:
        path: ``str`` -> repository relative path.
        old: Optional ``Sequence[str]`` -> old content, ``None`` for a file
            the change adds.
        new: Optional ``Sequence[str]`` -> new content, ``None`` for a file
            the change deletes.
        context: ``int`` -> number of context lines.

    Returns:
        ``str`` -> unified diff text, empty if both versions are equal.
    """
    from_file = f'a/{path}' if old is not None else DEV_NULL
    to_file = f'b/{path}' if new is not None else DEV_NULL
    out = []
    body = difflib.unified_diff(_terminated(old or ()), _terminated(new or ()),
                                from_file, to_file, n=context, lineterm='')
    for i, line in enumerate(body):
        if i < 2 or line.startswith('@@'):
            out.append(line)
        elif line.endswith('\n'):
            out.append(line[:-1])
        else:
            out.extend((line, NO_NEWLINE))
    return ''.join(f'{line}\n' for line in out)
