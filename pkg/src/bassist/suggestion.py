"""
Converts change runs into suggested-change review comments: contiguous
replacements of existing head lines with a rendered markdown body.
"""

from dataclasses import dataclass
from functools import cached_property
import re
from typing import Callable, List, Optional, Sequence, Tuple

from .diff import ChangeRun, FileLines
from .policy import Fingerprint, fingerprint_marker, make_fingerprint
from .tools.common import (DEFAULT_CONFIG, NO_EXPLANATION, AnchorOutOfRange,
                           Severity, tame_fences)

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

DEFAULT_REPRO_COMMAND = DEFAULT_CONFIG['render']['repro_command']
_OPEN_FENCE_RE = re.compile(r'^(`{3,})suggestion$')
_BACKTICKS_RE = re.compile(r'`+')


@dataclass(frozen=True)
class FindingMeta:
    """Metadata of the finding a suggestion originates from."""
    tool: str
    rule: str
    severity: Severity = Severity.INFO
    reason: Optional[str] = None
    help_url: Optional[str] = None


@dataclass(frozen=True)
class Suggestion:
    """
    Replacement of the head lines ``start_line..end_line`` (inclusive) of
    ``file``. An empty replacement deletes the anchored lines.
    """
    file: str
    start_line: int
    end_line: int
    replacement: Tuple[str, ...]
    tool: str
    rule: str
    severity: Severity = Severity.INFO
    reason: Optional[str] = None
    help_url: Optional[str] = None
    run_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'replacement', tuple(self.replacement))
        if self.start_line < 1 or self.end_line < self.start_line:
            raise ValueError(f'invalid anchor {self.start_line}..'
                             f'{self.end_line}')
        if any('\n' in line for line in self.replacement):
            raise ValueError('replacement lines must not contain newlines')

    @cached_property
    def fingerprint(self) -> Fingerprint:
        """:data:`~bassist.policy.Fingerprint` of anchor and content."""
        return make_fingerprint(self.file, self.start_line, self.end_line,
                                self.replacement, self.tool, self.rule)

    @property
    def anchor(self) -> range:
        """``range`` -> the anchored head line numbers."""
        return range(self.start_line, self.end_line + 1)


@dataclass(frozen=True)
class RenderedComment:
    """A suggestion rendered as markdown review comment body."""
    file: str
    start_line: int
    end_line: int
    body: str
    fingerprint: Fingerprint


def run_anchor(run: ChangeRun) -> Tuple[int, int]:
    """
    Head lines a suggestion for ``run`` is anchored on. Insertions consume
    the preceding line, or the first line at the top of the file.

    Returns:
        ``Tuple[int, int]`` -> inclusive start and end line.
    """
    if not run.is_insertion:
        return run.start, run.end
    if run.insert_after == 0:
        return 1, 1
    return run.insert_after, run.insert_after


def to_suggestion(run: ChangeRun, head_file: Sequence[str],
                  meta: FindingMeta) -> Suggestion:
    """
    Converts a relevant change run into a :class:`Suggestion`.

    Args:
        run: :class:`~bassist.diff.patch.ChangeRun` -> in head coordinates.
        head_file: ``Sequence[str]`` -> head content of ``run.file``.
        meta: :class:`FindingMeta`

    Returns:
        :class:`Suggestion`

    Raises:
        AnchorOutOfRange: if the run does not fit into ``head_file``.
    """
    size = len(head_file)
    start, end = run_anchor(run)
    if end > size:
        raise AnchorOutOfRange(f'{run.file}: lines {start}..{end} exceed the '
                               f'{size} lines of the head file.')
    if not run.is_insertion:
        replacement = run.replacement
    elif run.insert_after == 0:
        replacement = run.replacement + (head_file[0], )
    else:
        replacement = (head_file[start - 1], ) + run.replacement
    return Suggestion(run.file, start, end, replacement, meta.tool, meta.rule,
                      meta.severity, meta.reason, meta.help_url, run.run_count)


def apply_suggestion(head_file: Sequence[str],
                     suggestion: Suggestion) -> FileLines:
    """
    Accepts a suggestion: the anchored lines are replaced by the suggested
    ones. The final newline state of ``head_file`` is kept.

    Returns:
        :class:`~bassist.diff.patch.FileLines`

    Raises:
        AnchorOutOfRange: if the anchor exceeds ``head_file``.
    """
    if suggestion.end_line > len(head_file):
        raise AnchorOutOfRange(f'{suggestion.file}: anchor '
                               f'{suggestion.start_line}..{suggestion.end_line}'
                               f' exceeds {len(head_file)} lines.')
    lines = list(head_file)
    lines[suggestion.start_line - 1:suggestion.end_line] = \
        suggestion.replacement
    return FileLines(lines, getattr(head_file, 'final_newline', True))


def _fuse(first: ChangeRun, second: ChangeRun,
          head_file: Sequence[str]) -> ChangeRun:
    between = tuple(head_file[first.end:second.start - 1])
    return ChangeRun(
        first.file, first.start, second.end,
        first.replacement + between + second.replacement,
        first.removed + between + second.removed,
        first.touches_eof or second.touches_eof,
        first.run_count + second.run_count,
    )


def merge_runs(runs: Sequence[ChangeRun], head_file: Sequence[str], gap: int,
               can_fuse: Optional[Callable[[ChangeRun], bool]] = None
               ) -> List[ChangeRun]:
    """
    Fuses neighbouring runs separated by at most ``gap`` unchanged head lines.
    The unchanged lines become part of the fused replacement verbatim. Runs
    whose anchors would collide are always fused.

    Args:
        runs: ``Sequence[ChangeRun]`` -> sorted, non-overlapping runs of one
            file.
        head_file: ``Sequence[str]`` -> head content of that file.
        gap: ``int`` -> maximum number of intervening unchanged lines.
        can_fuse: Optional ``Callable[[ChangeRun], bool]`` -> veto on a fused
            candidate, e.g. a relevance check.

    Returns:
        ``List[ChangeRun]``
    """
    merged: List[ChangeRun] = []
    for run in runs:
        if merged:
            prev = merged[-1]
            collide = run_anchor(prev)[1] >= run_anchor(run)[0]
            distance = run.start - prev.end - 1
            if collide or (gap > 0 and distance <= gap
                           and run.start - 1 <= len(head_file)):
                fused = _fuse(prev, run, head_file)
                if collide or can_fuse is None or can_fuse(fused):
                    merged[-1] = fused
                    continue
        merged.append(run)
    return merged


def fence_for(lines: Sequence[str]) -> str:
    """
    Backtick fence one longer than the longest backtick run in ``lines``,
    at least three.
    """
    longest = max((len(m) for line in lines
                   for m in _BACKTICKS_RE.findall(line)), default=0)
    return '`' * max(3, longest + 1)


def render_comment(suggestion: Suggestion,
                   repro_command: str = DEFAULT_REPRO_COMMAND
                   ) -> RenderedComment:
    """
    Renders the review comment body: a metadata header naming tool, rule,
    severity and reason, a local reproduction hint, one ``suggestion`` fenced
    block and the hidden fingerprint marker.

    Args:
        suggestion: :class:`Suggestion`
        repro_command: ``str`` -> template, ``{tool}`` and ``{rule}`` are
            substituted.

    Returns:
        :class:`RenderedComment`
    """
    severity = suggestion.severity
    reason = (suggestion.reason or '').strip() or f'{NO_EXPLANATION}.'
    try:
        repro = repro_command.format(tool=suggestion.tool,
                                     rule=suggestion.rule)
    except (KeyError, IndexError, ValueError):
        repro = repro_command
    header = [
        f'**Suggested fix** from `{suggestion.tool}` (rule '
        f'`{suggestion.rule}`)',
        '',
        f'Severity: **{severity.label}** '
        f'({"required" if severity.required else "optional"})',
        '',
        f'Reason: {reason}',
    ]
    if suggestion.help_url:
        header += ['', f'Reference: {suggestion.help_url}']
    header += ['', f'Reproduce locally: `{repro}`']
    fence = fence_for(suggestion.replacement)
    body = '\n'.join(tame_fences(line) for line in header)
    body += f'\n\n{fence}suggestion\n'
    body += ''.join(f'{line}\n' for line in suggestion.replacement)
    body += f'{fence}\n\n{fingerprint_marker(suggestion.fingerprint)}'
    return RenderedComment(suggestion.file, suggestion.start_line,
                           suggestion.end_line, body, suggestion.fingerprint)


def parse_suggestion_body(body: str) -> Optional[List[str]]:
    """
    Extracts the replacement lines of the first ``suggestion`` block.

    Returns:
        Optional ``List[str]`` -> ``None`` if the body holds no complete block.
    """
    lines = body.split('\n')
    for i, line in enumerate(lines):
        match = _OPEN_FENCE_RE.match(line)
        if match is None:
            continue
        fence = match.group(1)
        for j in range(i + 1, len(lines)):
            if lines[j] == fence:
                return lines[i + 1:j]
        return None
    return None
