"""
Decides which lines a pull request touches and whether a change run falls
into them, allowing for a small vicinity around every touched line.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, Mapping, Optional, Set, Union

from .diff import ChangeRun, LineKind, UnifiedDiff
from .tools.common import MAX_VICINITY_RADIUS, PolicyError

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


@dataclass(frozen=True)
class ChangedLineSet:
    """
    Head-coordinate line numbers per repository path. A path missing from
    the mapping has no changed lines.
    """
    lines: Mapping[str, FrozenSet[int]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for path, numbers in self.lines.items():
            numbers = frozenset(numbers)
            if any(n < 1 for n in numbers):
                raise ValueError(f'line numbers of "{path}" must be >= 1')
            frozen[path] = numbers
        object.__setattr__(self, 'lines', frozen)

    def __getitem__(self, path: str) -> FrozenSet[int]:
        return self.lines.get(path, frozenset())

    def __contains__(self, path: str) -> bool:
        return path in self.lines

    def __iter__(self) -> Iterator[str]:
        return iter(self.lines)

    def __len__(self) -> int:
        return len(self.lines)

    def issubset(self, other: 'ChangedLineSet') -> bool:
        """``bool`` -> whether every line of ``self`` is in ``other``."""
        return all(self[p] <= other[p] for p in self.lines)

    def clamped(self, lengths: Mapping[str, int]) -> 'ChangedLineSet':
        """
        Drops the lines past the end of the files in ``lengths``, a mapping
        of path to head line count. Other paths are kept as they are.
        """
        return ChangedLineSet({
            path: {n for n in numbers if n <= max(lengths[path], 1)}
            if path in lengths else numbers
            for path, numbers in self.lines.items()})


@dataclass(frozen=True)
class VicinityRadius:
    """Number of lines around a changed line that still count as touched."""
    radius: int = 3

    def __post_init__(self):
        if not isinstance(self.radius, int) or isinstance(self.radius, bool):
            raise PolicyError('vicinity radius must be an integer.')
        if not 0 <= self.radius <= MAX_VICINITY_RADIUS:
            raise PolicyError(f'vicinity radius must lie in '
                              f'0..{MAX_VICINITY_RADIUS}, got {self.radius}.')


def changed_lines(pr_diff: UnifiedDiff) -> ChangedLineSet:
    """
    Collects the head line numbers a pull request adds or modifies. A run of
    removals without additions contributes the head lines around the gap it
    leaves. A gap at the end of a file also yields the line past the end,
    since the diff alone does not tell the head length; see
    :meth:`ChangedLineSet.clamped`. Files deleted by the pull request and
    binary changes contribute nothing.

    Args:
        pr_diff: :class:`~bassist.diff.unidiff.UnifiedDiff` -> base to head
            diff of the pull request.

    Returns:
        :class:`ChangedLineSet`
    """
    result: Dict[str, Set[int]] = {}
    for file_diff in pr_diff:
        if file_diff.is_deleted_file or file_diff.is_binary:
            continue
        numbers = result.setdefault(file_diff.path, set())
        for hunk in file_diff.hunks:
            new_line = hunk.new_start if hunk.new_count else hunk.new_start + 1
            removing = adding = False
            for line in hunk.lines + (None, ):
                if line is None or line.kind is LineKind.CONTEXT:
                    if removing and not adding:
                        if new_line > 1:
                            numbers.add(new_line - 1)
                        numbers.add(new_line)
                    removing = adding = False
                    new_line += 1
                elif line.kind is LineKind.ADD:
                    numbers.add(new_line)
                    adding = True
                    new_line += 1
                else:
                    removing = True
    return ChangedLineSet(result)


def expand_vicinity(lines: ChangedLineSet,
                    radius: Union[int, VicinityRadius]) -> ChangedLineSet:
    """
    Widens every line ``n`` to ``max(1, n - radius)..n + radius``.

    Args:
        lines: :class:`ChangedLineSet`
        radius: ``int`` or :class:`VicinityRadius`

    Returns:
        :class:`ChangedLineSet`
    """
    if not isinstance(radius, VicinityRadius):
        radius = VicinityRadius(radius)
    width = radius.radius
    expanded = {}
    for path, numbers in lines.lines.items():
        wide: Set[int] = set()
        for n in numbers:
            wide.update(range(max(1, n - width), n + width + 1))
        expanded[path] = wide
    return ChangedLineSet(expanded)


def run_head_lines(run: ChangeRun,
                   head_length: Optional[int] = None) -> FrozenSet[int]:
    """
    Head lines a run occupies. Runs of APR patches are generated against the
    head commit, so their pre-patch range already is in head coordinates.
    An insertion after line ``k`` occupies ``k`` and ``k + 1`` (only ``k``
    at the end of the file), one at the top of the file occupies line ``1``.

    Args:
        run: :class:`~bassist.diff.patch.ChangeRun`
        head_length: Optional ``int`` -> line count of the head file, when
            known.

    Returns:
        ``FrozenSet[int]``
    """
    if not run.is_insertion:
        return frozenset(run.old_range)
    if run.insert_after == 0:
        return frozenset((1, ))
    if head_length is not None and run.insert_after >= head_length:
        return frozenset((run.insert_after, ))
    return frozenset((run.insert_after, run.insert_after + 1))


def is_relevant(run: ChangeRun, expanded: ChangedLineSet,
                head_length: Optional[int] = None) -> bool:
    """
    ``True`` if the run lies entirely inside the (vicinity expanded) lines
    the pull request touches. With ``head_length`` given, lines past the
    end of the head file count on neither side.

    Args:
        run: :class:`~bassist.diff.patch.ChangeRun`
        expanded: :class:`ChangedLineSet` -> already vicinity expanded.
        head_length: Optional ``int`` -> line count of the head file.

    Returns:
        ``bool``
    """
    if run.file not in expanded:
        return False
    if head_length is not None:
        expanded = expanded.clamped({run.file: head_length})
    return run_head_lines(run, head_length) <= expanded[run.file]
