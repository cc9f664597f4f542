"""
Webhook events: check run completion payloads and their signatures.
"""

from dataclasses import dataclass
import hashlib
import hmac
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..tools.common import MalformedPayload, split_repo

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

EVENT_HEADER = 'X-GitHub-Event'
DELIVERY_HEADER = 'X-GitHub-Delivery'
SIGNATURE_HEADER = 'X-Hub-Signature-256'
CHECK_RUN_EVENT = 'check_run'


class _PullRef(BaseModel):
    model_config = ConfigDict(extra='ignore')

    number: int = Field(ge=1)


class _CheckRunOutput(BaseModel):
    model_config = ConfigDict(extra='ignore')

    text: Optional[str] = None


class _CheckRun(BaseModel):
    model_config = ConfigDict(extra='ignore')

    name: str
    head_sha: str
    status: str = 'completed'
    conclusion: Optional[str] = None
    details_url: Optional[str] = None
    output: _CheckRunOutput = Field(default_factory=_CheckRunOutput)
    pull_requests: List[_PullRef] = Field(default_factory=list)


class _Repository(BaseModel):
    model_config = ConfigDict(extra='ignore')

    full_name: str


class CheckRunPayload(BaseModel):
    """Schema of a ``check_run`` webhook delivery."""
    model_config = ConfigDict(extra='ignore')

    action: str
    check_run: _CheckRun
    repository: _Repository


@dataclass(frozen=True)
class CheckEvent:
    """A successfully completed findings check of a pull request."""
    repo: str
    pr_number: int
    head_commit: str
    check_name: str
    conclusion: Literal['success', 'failure', 'neutral']
    report_location: str

    def __post_init__(self):
        if self.pr_number < 1:
            raise ValueError('pr_number must be >= 1')
        if not self.head_commit:
            raise ValueError('head_commit must not be empty')
        split_repo(self.repo)

    @property
    def key(self):
        """``Tuple[str, int]`` -> the pull request this event belongs to."""
        return self.repo, self.pr_number


@dataclass(frozen=True)
class Ignore:
    """A delivery that does not trigger the pipeline."""
    reason: str


def parse_check_event(payload: Union[str, bytes],
                      check_name: str) -> Union[CheckEvent, Ignore]:
    """
    Interprets a check run webhook payload.

    Args:
        payload: ``str`` or ``bytes`` -> JSON document as delivered.
        check_name: ``str`` -> name of the check producing findings reports.

    Returns:
        :class:`CheckEvent` or :class:`Ignore`

    Raises:
        MalformedPayload: if the document cannot be understood.
    """
    try:
        data = CheckRunPayload.model_validate_json(payload)
    except (ValidationError, ValueError, TypeError, RecursionError) as err:
        raise MalformedPayload(f'invalid check run payload: {err}') from None
    run = data.check_run
    if data.action != 'completed':
        return Ignore(f'action {data.action}')
    if run.name != check_name:
        return Ignore(f'check {run.name}')
    if run.conclusion != 'success':
        return Ignore(f'conclusion {run.conclusion}')
    if not run.pull_requests:
        return Ignore('no pull request')
    location = run.details_url or (run.output.text or '').strip()
    if not location:
        raise MalformedPayload('check run carries no report location.')
    try:
        return CheckEvent(data.repository.full_name,
                          run.pull_requests[0].number, run.head_sha, run.name,
                          run.conclusion, location)
    except ValueError as err:
        raise MalformedPayload(str(err)) from None


def sign_payload(secret: str, payload: bytes) -> str:
    """``str`` -> signature header value for ``payload``."""
    digest = hmac.new(secret.encode('utf-8'), payload, hashlib.sha256)
    return f'sha256={digest.hexdigest()}'


def verify_signature(secret: str, payload: bytes,
                     signature: Optional[str]) -> bool:
    """
    Checks the HMAC-SHA256 signature of a delivery in constant time. The
    ``sha256=`` prefix is optional.
    """
    if not secret or not signature:
        return False
    if signature.startswith('sha256='):
        signature = signature[len('sha256='):]
    expected = sign_payload(secret, payload)[len('sha256='):]
    return hmac.compare_digest(
        expected.encode('ascii'),
        signature.strip().lower().encode('utf-8', 'replace'))
