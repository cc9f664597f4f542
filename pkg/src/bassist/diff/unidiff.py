"""
Unified diff value types plus the parser and serializer for the format.

All values are immutable; every constructor validates its invariants and
raises :class:`~bassist.tools.common.MalformedDiff` on violation.
"""

from dataclasses import dataclass, replace
from enum import Enum
import io
from typing import Iterator, List, Optional, Tuple, Union

from unidiff import Hunk as PatchHunk
from unidiff import PatchedFile, PatchSet
from unidiff.constants import LINE_TYPE_NO_NEWLINE
from unidiff.errors import UnidiffParseError

from ..tools.common import MalformedDiff

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

NO_NEWLINE = '\\ No newline at end of file'
DEV_NULL = '/dev/null'

_KINDS = (' ', '+', '-')


class LineKind(Enum):
    """Enum: kind of a hunk body line, valued by its diff prefix."""
    CONTEXT = ' '
    ADD = '+'
    REMOVE = '-'


@dataclass(frozen=True)
class DiffLine:
    """A single hunk body line, stored without prefix and newline."""
    kind: LineKind
    text: str
    no_newline_at_eof: bool = False

    def __post_init__(self):
        if '\n' in self.text:
            raise MalformedDiff('diff line text must not contain a newline.')

    @property
    def old_side(self) -> bool:
        """``bool`` -> whether the line exists in the pre-patch file."""
        return self.kind is not LineKind.ADD

    @property
    def new_side(self) -> bool:
        """``bool`` -> whether the line exists in the post-patch file."""
        return self.kind is not LineKind.REMOVE


@dataclass(frozen=True)
class Hunk:
    """
    One contiguous region of a file diff.

    For a pure insertion (``old_count == 0``) ``old_start`` is the line
    after which the insertion happens, ``0`` meaning the top of the file. The
    same convention applies to ``new_start`` of a pure deletion.
    """
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    lines: Tuple[DiffLine, ...]
    section: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'lines', tuple(self.lines))
        if not self.lines:
            raise MalformedDiff('hunk without body lines.')
        for start, count in ((self.old_start, self.old_count),
                             (self.new_start, self.new_count)):
            if count < 0 or start < 0 or (count and start < 1):
                raise MalformedDiff(f'invalid hunk range {start},{count}.')
        old = sum(1 for line in self.lines if line.old_side)
        new = sum(1 for line in self.lines if line.new_side)
        if (old, new) != (self.old_count, self.new_count):
            raise MalformedDiff(
                f'hunk header counts -{self.old_count} +{self.new_count} do '
                f'not match body counts -{old} +{new}.'
            )

    @property
    def old_span(self) -> Tuple[int, int]:
        """
        ``Tuple[int, int]`` -> 0-based, half-open slice of the pre-patch file
        covered by this hunk (empty for pure insertions).
        """
        first = self.old_start - 1 if self.old_count else self.old_start
        return first, first + self.old_count

    @property
    def header(self) -> str:
        """``str`` -> the ``@@ -a,b +c,d @@`` header line."""
        head = (f'@@ -{self.old_start},{self.old_count} '
                f'+{self.new_start},{self.new_count} @@')
        return f'{head} {self.section}' if self.section else head


@dataclass(frozen=True)
class FileDiff:
    """
    Changes to a single file. Paths are repository relative, without the
    ``a/`` and ``b/`` prefixes. New files carry their path in both fields, as
    do deleted files.
    """
    # pylint: disable=too-many-instance-attributes
    old_path: str
    new_path: str
    hunks: Tuple[Hunk, ...] = ()
    is_new_file: bool = False
    is_deleted_file: bool = False
    is_rename: bool = False
    is_copy: bool = False
    is_binary: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'hunks', tuple(self.hunks))
        if self.is_new_file and self.is_deleted_file:
            raise MalformedDiff(f'"{self.path}" is both new and deleted.')
        if self.is_new_file:
            object.__setattr__(self, 'old_path', self.new_path)
        elif self.is_deleted_file:
            object.__setattr__(self, 'new_path', self.old_path)
        if not self.old_path or not self.new_path:
            raise MalformedDiff('file diff without path.')
        end = 0
        for hunk in self.hunks:
            first, last = hunk.old_span
            if first < end:
                raise MalformedDiff(f'hunks of "{self.path}" overlap or are '
                                    f'out of order.')
            end = last
            if self.is_new_file and hunk.old_count:
                raise MalformedDiff(f'new file "{self.path}" removes lines.')
            if self.is_deleted_file and hunk.new_count:
                raise MalformedDiff(f'deleted file "{self.path}" adds lines.')

    @property
    def path(self) -> str:
        """``str`` -> the path of the file after the change."""
        return self.new_path

    @property
    def is_line_patch(self) -> bool:
        """
        ``bool`` -> ``False`` for renames, copies and binary changes, which
        cannot be expressed as line replacements.
        """
        return not (self.is_rename or self.is_copy or self.is_binary)


@dataclass(frozen=True)
class UnifiedDiff:
    """An ordered collection of :class:`FileDiff` with unique paths."""
    files: Tuple[FileDiff, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'files', tuple(self.files))
        seen = set()
        for file_diff in self.files:
            if file_diff.path in seen:
                raise MalformedDiff(f'"{file_diff.path}" appears more than '
                                    f'once.')
            seen.add(file_diff.path)

    def __iter__(self) -> Iterator[FileDiff]:
        return iter(self.files)

    def __len__(self) -> int:
        return len(self.files)

    def get(self, path: str) -> Optional[FileDiff]:
        """Returns the :class:`FileDiff` for ``path`` or ``None``."""
        for file_diff in self.files:
            if file_diff.path == path:
                return file_diff
        return None

    @property
    def paths(self) -> Tuple[str, ...]:
        """``Tuple[str, ...]`` -> the file paths in diff order."""
        return tuple(f.path for f in self.files)


def _strip_prefix(name: str, prefix: str) -> str:
    if name == DEV_NULL:
        return ''
    return name[len(prefix):] if name.startswith(prefix) else name


def _build_hunk(hunk: PatchHunk) -> Hunk:
    body: List[DiffLine] = []
    for line in hunk:
        if line.line_type == LINE_TYPE_NO_NEWLINE:
            if not body:
                raise MalformedDiff('no newline marker without line.')
            body[-1] = replace(body[-1], no_newline_at_eof=True)
        elif line.line_type in _KINDS:
            text = line.value[:-1] if line.value.endswith('\n') \
                else line.value
            body.append(DiffLine(LineKind(line.line_type), text))
    return Hunk(hunk.source_start, hunk.source_length, hunk.target_start,
                hunk.target_length, tuple(body), hunk.section_header)


def _build_file(patched: PatchedFile) -> FileDiff:
    old = _strip_prefix(patched.source_file or '', 'a/')
    new = _strip_prefix(patched.target_file or '', 'b/')
    flags = {'is_new_file': patched.source_file == DEV_NULL,
             'is_deleted_file': patched.target_file == DEV_NULL,
             'is_rename': False, 'is_copy': False,
             'is_binary': bool(getattr(patched, 'is_binary_file', False))}
    for line in patched.patch_info or ():
        line = line.rstrip('\n')
        if line.startswith('new file mode'):
            flags['is_new_file'] = True
        elif line.startswith('deleted file mode'):
            flags['is_deleted_file'] = True
        elif line.startswith(('rename from ', 'copy from ')):
            flags['is_rename' if line[0] == 'r' else 'is_copy'] = True
            old = line.split(' ', 2)[-1]
        elif line.startswith(('rename to ', 'copy to ')):
            flags['is_rename' if line[0] == 'r' else 'is_copy'] = True
            new = line.split(' ', 2)[-1]
        elif line.startswith('GIT binary patch') or (
                line.startswith('Binary files ') and line.endswith(' differ')):
            flags['is_binary'] = True
    return FileDiff(old or new, new or old,
                    tuple(_build_hunk(h) for h in patched), **flags)


def _check_hunk_end(lines: List[str], hunk: PatchHunk) -> None:
    """Rejects body lines left over after a hunk is complete."""
    numbers = [line.diff_line_no for line in hunk
               if line.diff_line_no is not None]
    pos = max(numbers, default=len(lines))
    while pos < len(lines) and lines[pos].startswith('\\'):
        pos += 1
    if pos >= len(lines):
        return
    line = lines[pos]
    if line == '-- ':
        return  # mail signature of git format-patch output
    if line.startswith('--- ') and pos + 1 < len(lines) \
            and lines[pos + 1].startswith('+++ '):
        return
    if line[:1] in ('+', '-', ' '):
        raise MalformedDiff(f'line {pos + 1}: hunk body longer than its '
                            f'header states.')


def parse_unidiff(text: Union[str, bytes]) -> UnifiedDiff:
    """
    Parses a unified diff document with :class:`unidiff.PatchSet`. Extended
    header lines (``index``, modes, timestamps, ...) are tolerated and
    discarded, renames, copies and binary markers are flagged on the
    resulting :class:`FileDiff`.

    Args:
        text: ``str`` or UTF-8 encoded ``bytes`` -> the diff document.

    Returns:
        :class:`UnifiedDiff`

    Raises:
        MalformedDiff: on bad hunk headers, count mismatches between header
            and body, or truncated hunks.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode('utf-8')
        except UnicodeDecodeError as err:
            raise MalformedDiff(f'diff is not valid UTF-8: {err}') from None
    try:
        patch_set = PatchSet(io.StringIO(text))
    except UnidiffParseError as err:
        raise MalformedDiff(str(err)) from None
    except (AttributeError, LookupError, NameError, TypeError,
            ValueError) as err:
        # unidiff fails this way on headers in an unexpected order
        raise MalformedDiff(f'unusable diff: {err!r}') from None
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    hunks = [hunk for patched in patch_set for hunk in patched]
    if sum(1 for line in lines if line.startswith('@@')) != len(hunks):
        raise MalformedDiff('bad hunk header or hunk without file header.')
    for hunk in hunks:
        _check_hunk_end(lines, hunk)
    return UnifiedDiff(tuple(_build_file(p) for p in patch_set))


def _file_lines(file_diff: FileDiff) -> Iterator[str]:
    old, new = file_diff.old_path, file_diff.new_path
    yield f'diff --git a/{old} b/{new}'
    if file_diff.is_new_file:
        yield 'new file mode 100644'
    if file_diff.is_deleted_file:
        yield 'deleted file mode 100644'
    if file_diff.is_rename:
        yield f'rename from {old}'
        yield f'rename to {new}'
    if file_diff.is_copy:
        yield f'copy from {old}'
        yield f'copy to {new}'
    src = DEV_NULL if file_diff.is_new_file else f'a/{old}'
    dst = DEV_NULL if file_diff.is_deleted_file else f'b/{new}'
    if file_diff.is_binary:
        yield f'Binary files {src} and {dst} differ'
    if not file_diff.hunks:
        return
    yield f'--- {src}'
    yield f'+++ {dst}'
    for hunk in file_diff.hunks:
        yield hunk.header
        for line in hunk.lines:
            yield line.kind.value + line.text
            if line.no_newline_at_eof:
                yield NO_NEWLINE


def serialize_unidiff(diff: UnifiedDiff) -> str:
    """
    Renders ``diff`` as a git style unified diff document. Hunk headers are
    regenerated from the line counts, always with explicit counts.

    Args:
        diff: :class:`UnifiedDiff`

    Returns:
        ``str`` -> the document, ``""`` for an empty diff.
    """
    out = [line for file_diff in diff.files for line in _file_lines(file_diff)]
    return '\n'.join(out) + '\n' if out else ''

