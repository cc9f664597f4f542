"""
Shared fixtures data and hypothesis strategies for the bassist tests.
"""

import json
from typing import Any, Dict, List, Optional

from hypothesis import strategies as st

from bassist.diff import DiffLine, FileDiff, FileLines, Hunk, LineKind
from bassist.diff import UnifiedDiff

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

REPO = 'octo/demo'
PR = 7
CHECK = 'static-analysis'

# The pull request changes line 11 of a.cpp and adds line 12.
A_CPP_BASE = [f'line{i}' for i in range(1, 10)] + [
    'context10', 'old11', 'context13', 'line14', 'line15']
A_CPP_HEAD = [f'line{i}' for i in range(1, 10)] + [
    'context10', 'new11', 'new12', 'context13', 'line14', 'line15']
FIX_A_CPP = '--- a/a.cpp\n+++ b/a.cpp\n@@ -11,1 +11,1 @@\n-new11\n+fixed11\n'


def text(lines: List[str]) -> str:
    """Newline terminated file content."""
    return ''.join(f'{line}\n' for line in lines)


def finding(patch: str, tool: str = 'clang-tidy',
            rule: str = 'readability-braces', severity: str = 'warning',
            message: Optional[str] = 'statement should be inside braces',
            **extra: Any) -> Dict[str, Any]:
    """One ``findings`` entry of a report."""
    entry = {'tool': tool, 'rule': rule, 'severity': severity,
             'message': message, 'patch_unidiff': patch}
    entry.update(extra)
    return entry


def report_json(commit: str, findings: List[Dict[str, Any]],
                version: int = 1, run_id: str = 'ci-1') -> str:
    """A findings report document."""
    return json.dumps({'version': version, 'run_id': run_id,
                       'commit': commit, 'findings': findings})


def check_run_payload(head_sha: str, details_url: Optional[str],
                      repo: str = REPO, pr: Optional[int] = PR,
                      name: str = CHECK, conclusion: str = 'success',
                      action: str = 'completed') -> bytes:
    """A ``check_run`` webhook payload."""
    return json.dumps({
        'action': action,
        'check_run': {
            'name': name,
            'head_sha': head_sha,
            'status': 'completed',
            'conclusion': conclusion,
            'details_url': details_url,
            'pull_requests': [] if pr is None else [{'number': pr}],
        },
        'repository': {'full_name': repo},
    }).encode('utf-8')


# Hypothesis strategies

line_texts = st.text(
    alphabet=st.characters(blacklist_characters='\n\r',
                           blacklist_categories=('Cs', )),
    max_size=12)

paths = st.from_regex(r'[a-z][a-z0-9_]{0,6}(/[a-z0-9_]{1,6}){0,2}\.(c|py|cpp)',
                      fullmatch=True)


@st.composite
def file_lines(draw, min_size: int = 0, max_size: int = 12,
               newline: Optional[bool] = None) -> FileLines:
    """File content drawn from a small vocabulary, so diffs share lines."""
    words = st.sampled_from(['a', 'b', 'c', 'd', '', '  x = 1;', '}'])
    lines = draw(st.lists(words | line_texts, min_size=min_size,
                          max_size=max_size))
    if newline is None:
        newline = draw(st.booleans())
    return FileLines(lines, newline or not lines)


@st.composite
def hunk_lists(draw, max_hunks: int = 3) -> List[Hunk]:
    """Ordered, non overlapping hunks with consistent coordinates."""
    result: List[Hunk] = []
    old_pos = delta = 0
    for _ in range(draw(st.integers(0, max_hunks))):
        gap = draw(st.integers(1 if result else 0, 5))
        body = draw(st.lists(st.tuples(st.sampled_from(list(LineKind)),
                                       line_texts),
                             min_size=1, max_size=6))
        lines = tuple(DiffLine(kind, line) for kind, line in body)
        old_count = sum(1 for line in lines if line.old_side)
        new_count = sum(1 for line in lines if line.new_side)
        first = old_pos + gap
        new_first = first + delta
        result.append(Hunk(first + 1 if old_count else first, old_count,
                           new_first + 1 if new_count else new_first,
                           new_count, lines))
        old_pos = first + old_count
        delta += new_count - old_count
    return result


@st.composite
def unified_diffs(draw, max_files: int = 3) -> UnifiedDiff:
    """Plain modification diffs of distinct files."""
    names = draw(st.lists(paths, max_size=max_files, unique=True))
    return UnifiedDiff(tuple(FileDiff(name, name, tuple(draw(hunk_lists())))
                             for name in names))


diff_fragments = st.lists(
    st.sampled_from([
        'diff --git a/x.c b/x.c', '--- a/x.c', '+++ b/x.c', '--- /dev/null',
        '+++ /dev/null', '@@ -1,2 +1,2 @@', '@@ -0,0 +1 @@', '@@ -3 +3,0 @@',
        ' ctx', '-old', '+new', '\\ No newline at end of file',
        'rename from x.c', 'rename to y.c', 'new file mode 100644',
        'Binary files a/x.c and b/x.c differ', 'GIT binary patch', '-- ',
        '', '@@ -99999999999999999999999 +1 @@',
    ]) | st.text(max_size=30),
    max_size=20).map('\n'.join)
