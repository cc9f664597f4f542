"""
Common constants, enums, exceptions and helper functions.
"""

from dataclasses import dataclass, field
from enum import IntEnum
import re
from typing import Any, Dict, Optional, Tuple

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

# Default configuration

DEFAULT_CONFIG = {
    'base': {
        'log_level': 'INFO',
        'listen_address': '127.0.0.1:8080',
    },
    'forge': {
        'base_url': 'https://api.github.com',
        'token': '',
        'webhook_secret': '',
        'bot_login': 'bassist[bot]',
        'check_name': 'static-analysis',
        'timeout': 10,
        'max_attempts': 4,
        'report_hosts': '',
    },
    'render': {
        'repro_command': 'run-static-analysis --tool {tool}',
    },
    'policy': {
        'max_suggestions_per_pr': 10,
        'vicinity_radius': 3,
        'merge_gap': 2,
        'severity_floor': 'info',
        'enabled': 'true',
    },
}

POLICY_FILE_NAME = '.bassist.toml'
REPORT_VERSION = 1
MAX_VICINITY_RADIUS = 100
NO_EXPLANATION = 'no explanation provided by tool'


# Enums

class Severity(IntEnum):
    """
    Enum: Severity of a finding. Ordered, so ``ERROR > WARNING > INFO``.
    """
    INFO = 0
    WARNING = 1
    ERROR = 2

    @property
    def label(self) -> str:
        """``str`` -> lower case name as used in reports and policy files."""
        return self.name.lower()

    @property
    def required(self) -> bool:
        """``bool`` -> whether a fix of this severity is required."""
        return self is Severity.ERROR

    @classmethod
    def parse(cls, value: str) -> 'Severity':
        """
        Converts a report/policy severity string into a :class:`Severity`.

        Args:
            value: ``str`` -> one of ``error``, ``warning``, ``info``.

        Returns:
            ``Severity``

        Raises:
            ValueError: on unknown severity names.
        """
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f'unknown severity "{value}"') from None


# Exceptions

class BassistError(Exception):
    """Base class of all errors raised by bassist."""
    exit_code = 1


class MalformedDiff(BassistError):
    """Unified diff text could not be parsed."""
    exit_code = 4


class ContextMismatch(BassistError):
    """The base content does not match what a patch expects."""


class AnchorOutOfRange(BassistError):
    """A line range does not fit into the file it refers to."""


class UnrepresentableChange(BassistError):
    """A change cannot be expressed as a contiguous line replacement."""


class SchemaViolation(BassistError):
    """A findings report does not follow the report schema."""
    exit_code = 3


class StaleReport(BassistError):
    """A findings report was produced for a different commit."""


class PolicyError(BassistError):
    """A repository policy is invalid."""
    exit_code = 5


class ConfigError(BassistError):
    """The application configuration is invalid."""
    exit_code = 2


class MalformedPayload(BassistError):
    """A webhook payload could not be understood."""


class ForgeError(BassistError):
    """Base class of errors reported by the code review forge."""
    retryable = False


class NotFound(ForgeError):
    """The requested forge resource does not exist."""


class Unauthorized(ForgeError):
    """The forge rejected our credentials."""


class TransportFailure(ForgeError):
    """
    The forge could not be reached or answered with a transient error.

    Args:
        message: ``str``
        retry_after: Optional ``float`` -> seconds the forge asked us to wait.
    """
    retryable = True

    def __init__(self, message: str, retry_after: Optional[float] = None):
        super().__init__(message)
        self.retry_after = retry_after


class PRClosed(ForgeError):
    """The pull request is no longer open."""


class StaleHead(ForgeError):
    """The pull request head moved away from the expected commit."""


class AnchorRejected(ForgeError):
    """The forge refused to anchor a comment on the requested lines."""


# Records

@dataclass(frozen=True)
class Diagnostic:
    """
    A non fatal problem noticed while processing a run.

    Args:
        kind: ``str`` -> short machine readable identifier.
        message: ``str`` -> human readable description.
        fields: ``dict`` -> additional key/value context.
    """
    kind: str
    message: str
    fields: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        """Returns the diagnostic as plain ``dict``."""
        return {'kind': self.kind, 'message': self.message, **self.fields}


# Helper functions

def split_repo(repo: str) -> Tuple[str, str]:
    """
    Splits an ``owner/name`` repository identifier.

    Args:
        repo: ``str`` -> the repository identifier.

    Returns:
        ``Tuple[str, str]`` -> owner and name.
    """
    owner, sep, name = repo.partition('/')
    if not sep or not owner or not name or '/' in name:
        raise ValueError(f'expected "owner/name", got "{repo}"')
    return owner, name


def parse_bool(value: Any) -> bool:
    """
    Interprets configuration style boolean values.

    Args:
        value: ``bool`` or ``str`` -> e.g. ``true``, ``no``, ``1``.

    Returns:
        ``bool``
    """
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'expected a boolean, got "{value}"')


def tame_fences(text: str) -> str:
    """
    Shortens runs of three or more backticks or tildes, so free text can
    never open a fenced markdown block.

    Args:
        text: ``str`` -> the text to sanitize.

    Returns:
        ``str``
    """
    return re.sub(r'~{3,}', '~~', re.sub(r'`{3,}', '``', text))
