"""
File based forge stand-in used for dry runs: the pull request diff is
given, head contents come from a directory and posted comments are only
recorded.
"""

import itertools
import os
from typing import List

from . import ReviewComment
from ..diff import FileLines, UnifiedDiff
from ..suggestion import RenderedComment
from ..tools.common import NotFound, UnrepresentableChange

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

DRY_RUN_LOGIN = 'dry-run'


class LocalForge:
    """
    Args:
        pr_diff: :class:`~bassist.diff.unidiff.UnifiedDiff` -> the pull
            request diff.
        head_tree: ``str`` -> directory with the head revision checked out.
        head_commit: ``str`` -> revision id the head tree represents.
    """
    def __init__(self, pr_diff: UnifiedDiff, head_tree: str,
                 head_commit: str):
        self.pr_diff = pr_diff
        self.head_tree = os.path.realpath(head_tree)
        self.head_commit = head_commit
        self.posted: List[ReviewComment] = []
        self._ids = itertools.count(1)

    def fetch_pr_diff(self, repo: str, pr_number: int) -> UnifiedDiff:
        return self.pr_diff

    def fetch_file(self, repo: str, commit: str, path: str) -> bytes:
        """``bytes`` -> content of ``path`` inside the head tree."""
        full = os.path.realpath(os.path.join(self.head_tree, path))
        if os.path.commonpath([full, self.head_tree]) != self.head_tree:
            raise NotFound(f'{path} lies outside of the head tree.')
        try:
            with open(full, 'rb') as f:
                return f.read()
        except OSError as err:
            raise NotFound(f'{path}: {err}') from None

    def fetch_head_file(self, repo: str, commit: str, path: str) -> FileLines:
        try:
            return FileLines.from_text(
                self.fetch_file(repo, commit, path).decode('utf-8'))
        except UnicodeDecodeError:
            raise UnrepresentableChange(f'{path} is not UTF-8 text.') \
                from None

    def current_head(self, repo: str, pr_number: int) -> str:
        return self.head_commit

    def list_bot_comments(self, repo: str,
                          pr_number: int) -> List[ReviewComment]:
        return list(self.posted)

    def post_suggestion_comment(self, repo: str, pr_number: int,
                                head_commit: str,
                                comment: RenderedComment) -> ReviewComment:
        posted = ReviewComment(next(self._ids), comment.file,
                               comment.start_line, comment.end_line,
                               comment.body, DRY_RUN_LOGIN)
        self.posted.append(posted)
        return posted

    def fetch_report(self, location: str) -> bytes:
        try:
            with open(location, 'rb') as f:
                return f.read()
        except OSError as err:
            raise NotFound(f'report {location}: {err}') from None
