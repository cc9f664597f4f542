"""
Per-repository policy: budgeting, severity and tool filtering, and
deduplication of suggestions across pipeline runs.
"""

import configparser
from dataclasses import dataclass, field, replace
import hashlib
import json
import re
from typing import (TYPE_CHECKING, AbstractSet, Any, Dict, FrozenSet, Iterable,
                    List, Mapping, NewType, Optional, Sequence, Tuple, Union)

import tomli

from .tools.common import (DEFAULT_CONFIG, MAX_VICINITY_RADIUS, PolicyError,
                           Severity, parse_bool)

if TYPE_CHECKING:  # pragma: no cover
    from .report import Finding
    from .suggestion import Suggestion

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

Fingerprint = NewType('Fingerprint', str)

POLICY_KEYS = ('max_suggestions_per_pr', 'vicinity_radius', 'merge_gap',
               'tool_allowlist', 'severity_floor', 'enabled')
_MARKER_RE = re.compile(r'<!-- bassist:fp:([0-9a-f]{64}) -->')


def make_fingerprint(file: str, start_line: int, end_line: int,
                     replacement: Sequence[str], tool: str,
                     rule: str) -> Fingerprint:
    """
    Stable content hash of a suggestion. The input is serialized as JSON, so
    the value does not depend on the process, platform or Python version.

    Returns:
        :data:`Fingerprint` -> 64 lower case hex digits.
    """
    payload = json.dumps([file, start_line, end_line, list(replacement), tool,
                          rule], ensure_ascii=True, separators=(',', ':'))
    return Fingerprint(hashlib.sha256(payload.encode('ascii')).hexdigest())


def fingerprint_marker(fingerprint: Fingerprint) -> str:
    """``str`` -> hidden markdown comment carrying ``fingerprint``."""
    return f'<!-- bassist:fp:{fingerprint} -->'


def extract_fingerprint(body: str) -> Optional[Fingerprint]:
    """
    Recovers the fingerprint marker from a comment body. The last marker
    wins, as bodies end with it.

    Returns:
        Optional :data:`Fingerprint`
    """
    found = _MARKER_RE.findall(body or '')
    return Fingerprint(found[-1]) if found else None


@dataclass(frozen=True)
class RepoPolicy:
    """
    Per-repository settings. Invalid values raise
    :class:`~bassist.tools.common.PolicyError`.
    """
    max_suggestions_per_pr: int = 10
    vicinity_radius: int = 3
    merge_gap: int = 2
    tool_allowlist: Optional[FrozenSet[str]] = None
    severity_floor: Severity = Severity.INFO
    enabled: bool = True

    def __post_init__(self):
        for name in ('max_suggestions_per_pr', 'vicinity_radius', 'merge_gap'):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise PolicyError(f'{name} must be an integer, got {value!r}.')
        if self.max_suggestions_per_pr < 1:
            raise PolicyError('max_suggestions_per_pr must be at least 1.')
        if not 0 <= self.vicinity_radius <= MAX_VICINITY_RADIUS:
            raise PolicyError(f'vicinity_radius must lie in '
                              f'0..{MAX_VICINITY_RADIUS}.')
        if self.merge_gap < 0:
            raise PolicyError('merge_gap must not be negative.')
        if self.tool_allowlist is not None:
            if isinstance(self.tool_allowlist, str) or not all(
                    isinstance(t, str) for t in self.tool_allowlist):
                raise PolicyError('tool_allowlist must be a list of names.')
            object.__setattr__(self, 'tool_allowlist',
                               frozenset(self.tool_allowlist))
        if not isinstance(self.severity_floor, Severity):
            try:
                object.__setattr__(self, 'severity_floor',
                                   Severity.parse(self.severity_floor))
            except ValueError as err:
                raise PolicyError(str(err)) from None
        if not isinstance(self.enabled, bool):
            raise PolicyError('enabled must be a boolean.')

    def updated(self, values: Mapping[str, Any]) -> 'RepoPolicy':
        """
        Returns a copy with ``values`` applied. Only the documented policy
        keys are accepted.
        """
        unknown = sorted(set(values) - set(POLICY_KEYS))
        if unknown:
            raise PolicyError(f'unknown policy keys: {", ".join(unknown)}.')
        return replace(self, **dict(values))

    @classmethod
    def from_toml(cls, text: Union[str, bytes],
                  base: Optional['RepoPolicy'] = None) -> 'RepoPolicy':
        """
        Reads a ``.bassist.toml`` document. Keys missing from the document
        keep the value of ``base`` (or the defaults).

        Raises:
            PolicyError: on TOML syntax errors, unknown keys or bad values.
        """
        if isinstance(text, bytes):
            try:
                text = text.decode('utf-8')
            except UnicodeDecodeError as err:
                raise PolicyError(f'policy file is not UTF-8: {err}') from None
        try:
            values = tomli.loads(text)
        except tomli.TOMLDecodeError as err:
            raise PolicyError(f'invalid policy file: {err}') from None
        return (base or cls()).updated(values)

    @classmethod
    def from_config(cls, section: Union[configparser.SectionProxy,
                                        Mapping[str, str]]) -> 'RepoPolicy':
        """
        Builds the service wide default policy from the ``[policy]`` section
        of the INI configuration.
        """
        defaults = DEFAULT_CONFIG['policy']
        get = section.get
        try:
            allowlist = get('tool_allowlist', '')
            return cls(
                max_suggestions_per_pr=int(get(
                    'max_suggestions_per_pr',
                    defaults['max_suggestions_per_pr'])),
                vicinity_radius=int(get('vicinity_radius',
                                        defaults['vicinity_radius'])),
                merge_gap=int(get('merge_gap', defaults['merge_gap'])),
                tool_allowlist=frozenset(
                    t.strip() for t in allowlist.split(',') if t.strip()
                ) if allowlist and allowlist.strip() else None,
                severity_floor=get('severity_floor',
                                   defaults['severity_floor']),
                enabled=parse_bool(get('enabled', defaults['enabled'])),
            )
        except ValueError as err:
            raise PolicyError(f'invalid [policy] section: {err}') from None


def load_policy_file(path: str,
                     base: Optional[RepoPolicy] = None) -> RepoPolicy:
    """
    Reads a policy file from disk.

    Args:
        path: ``str`` -> path to a ``.bassist.toml`` file.
        base: Optional :class:`RepoPolicy` -> values for keys not present.

    Returns:
        :class:`RepoPolicy`
    """
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as err:
        raise PolicyError(f'cannot read policy file "{path}": {err}') from None
    return RepoPolicy.from_toml(data, base)


@dataclass(frozen=True)
class BudgetDecision:
    """Result of :func:`budget`."""
    accepted: Tuple['Suggestion', ...] = ()
    dropped: Tuple[Tuple['Suggestion', str], ...] = field(default=())


def filter_findings(findings: Iterable['Finding'],
                    policy: RepoPolicy) -> List['Finding']:
    """
    Keeps findings of allowlisted tools (all tools if there is no allowlist)
    with a severity at or above the policy floor. Order is preserved.
    """
    return [
        f for f in findings
        if (policy.tool_allowlist is None or f.tool in policy.tool_allowlist)
        and f.severity >= policy.severity_floor
    ]


def budget_key(suggestion: 'Suggestion') -> Tuple:
    """Total order used by :func:`budget`."""
    return (-int(suggestion.severity), suggestion.file, suggestion.start_line,
            suggestion.tool, suggestion.rule, suggestion.end_line,
            suggestion.fingerprint)


def budget(suggestions: Iterable['Suggestion'],
           policy: RepoPolicy) -> BudgetDecision:
    """
    Orders suggestions by severity (highest first), path and line, and keeps
    the first ``max_suggestions_per_pr`` of them.

    Returns:
        :class:`BudgetDecision` -> the rest is dropped with reason ``budget``.
    """
    ordered = sorted(suggestions, key=budget_key)
    limit = policy.max_suggestions_per_pr
    return BudgetDecision(
        tuple(ordered[:limit]),
        tuple((s, 'budget') for s in ordered[limit:]),
    )


def dedup(suggestions: Iterable['Suggestion'],
          already_posted: AbstractSet[Fingerprint]) -> List['Suggestion']:
    """
    Removes suggestions that were posted before or repeat an earlier entry of
    the same batch. Order is preserved.
    """
    seen = set(already_posted)
    result = []
    for suggestion in suggestions:
        if suggestion.fingerprint in seen:
            continue
        seen.add(suggestion.fingerprint)
        result.append(suggestion)
    return result


def fingerprints_of(bodies: Iterable[str]) -> Dict[Fingerprint, int]:
    """
    Counts fingerprint markers found in comment bodies.

    Args:
        bodies: ``Iterable[str]`` -> markdown comment bodies.

    Returns:
        ``Dict[Fingerprint, int]``
    """
    found: Dict[Fingerprint, int] = {}
    for body in bodies:
        fingerprint = extract_fingerprint(body)
        if fingerprint is not None:
            found[fingerprint] = found.get(fingerprint, 0) + 1
    return found
