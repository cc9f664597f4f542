"""
Access to the code review forge: webhook events, a REST client, a local
file based stand-in for dry runs and an in-memory mock forge server.
"""

from dataclasses import dataclass
from typing import List, Optional, Protocol

from pydantic import BaseModel, ConfigDict, Field

from ..diff import FileLines, UnifiedDiff
from ..suggestion import RenderedComment

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


class UserModel(BaseModel):
    """``user`` object of forge JSON."""
    model_config = ConfigDict(extra='ignore')

    login: str = ''


class CommentModel(BaseModel):
    """Review comment JSON as exchanged with the forge."""
    model_config = ConfigDict(extra='ignore')

    id: int
    path: str
    line: int
    start_line: Optional[int] = None
    side: str = 'RIGHT'
    body: str
    commit_id: str = ''
    user: UserModel = Field(default_factory=UserModel)


class PullModel(BaseModel):
    """The parts of a pull request JSON object in use."""
    model_config = ConfigDict(extra='ignore')

    number: int
    state: str
    head_sha: str = ''
    merged: bool = False


@dataclass(frozen=True)
class ReviewComment:
    """A review comment anchored on ``start_line..end_line`` of ``file``."""
    id: int
    file: str
    start_line: int
    end_line: int
    body: str
    author: str

    @classmethod
    def from_model(cls, model: CommentModel) -> 'ReviewComment':
        """Builds the comment from its forge JSON representation."""
        start = model.start_line if model.start_line is not None \
            else model.line
        return cls(model.id, model.path, start, model.line, model.body,
                   model.user.login)


class Forge(Protocol):
    """Operations the pipeline needs from a forge."""

    def fetch_pr_diff(self, repo: str, pr_number: int) -> UnifiedDiff:
        ...

    def fetch_file(self, repo: str, commit: str, path: str) -> bytes:
        ...

    def fetch_head_file(self, repo: str, commit: str, path: str) -> FileLines:
        ...

    def current_head(self, repo: str, pr_number: int) -> str:
        ...

    def list_bot_comments(self, repo: str,
                          pr_number: int) -> List[ReviewComment]:
        ...

    def post_suggestion_comment(self, repo: str, pr_number: int,
                                head_commit: str,
                                comment: RenderedComment) -> ReviewComment:
        ...

    def fetch_report(self, location: str) -> bytes:
        ...


__all__ = ['CommentModel', 'Forge', 'PullModel', 'ReviewComment',
           'UserModel']
