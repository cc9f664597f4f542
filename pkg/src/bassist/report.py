"""
Findings report ingestion. A report is a JSON document produced by CI that
bundles the output of static analysis and repair tools::

    {"version": 1, "run_id": "...", "commit": "...",
     "findings": [{"tool": "...", "rule": "...", "severity": "warning",
                   "message": "...", "patch_unidiff": "..."}]}

Every finding carries its fix as unified diff text against ``commit``.
"""

from dataclasses import dataclass
import logging
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .diff import UnifiedDiff, parse_unidiff
from .suggestion import FindingMeta
from .tools.common import (REPORT_VERSION, Diagnostic, MalformedDiff,
                           SchemaViolation, Severity, StaleReport)

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

logger = logging.getLogger(__name__)


class RawFinding(BaseModel):
    """Schema of one entry of ``findings``."""
    model_config = ConfigDict(extra='ignore')

    tool: str = Field(min_length=1)
    rule: str = Field(min_length=1)
    severity: str
    message: Optional[str] = None
    patch_unidiff: str
    help_url: Optional[str] = None
    commit: Optional[str] = None


class RawReport(BaseModel):
    """Schema of the report document."""
    model_config = ConfigDict(extra='ignore')

    version: int
    run_id: str
    commit: str = Field(min_length=1)
    findings: List[RawFinding]


@dataclass(frozen=True)
class Finding:
    """One tool result with its fix as parsed unified diff."""
    tool: str
    rule: str
    severity: Severity
    message: Optional[str]
    patch: UnifiedDiff
    commit: str
    help_url: Optional[str] = None

    @property
    def meta(self) -> FindingMeta:
        """:class:`~bassist.suggestion.FindingMeta` of this finding."""
        return FindingMeta(self.tool, self.rule, self.severity, self.message,
                           self.help_url)


@dataclass(frozen=True)
class Report:
    """
    A validated findings report. ``diagnostics`` lists findings that were
    dropped or altered while parsing.
    """
    version: int
    run_id: str
    commit: str
    findings: Tuple[Finding, ...] = ()
    diagnostics: Tuple[Diagnostic, ...] = ()


def _convert(index: int, raw: RawFinding, commit: str,
             diagnostics: List[Diagnostic]) -> Optional[Finding]:
    where = {'finding': index, 'tool': raw.tool, 'rule': raw.rule}
    if raw.commit and raw.commit != commit:
        diagnostics.append(Diagnostic(
            'foreign_commit', f'finding targets commit {raw.commit}', where))
        return None
    try:
        patch = parse_unidiff(raw.patch_unidiff)
    except MalformedDiff as err:
        diagnostics.append(Diagnostic('malformed_patch', str(err), where))
        return None
    if not any(fd.hunks for fd in patch):
        diagnostics.append(Diagnostic('empty_patch',
                                      'finding carries no changes', where))
        return None
    try:
        severity = Severity.parse(raw.severity)
    except ValueError:
        diagnostics.append(Diagnostic(
            'unknown_severity',
            f'unknown severity "{raw.severity}", using info', where))
        severity = Severity.INFO
    return Finding(raw.tool, raw.rule, severity, raw.message, patch, commit,
                   raw.help_url)


def parse_report(document: Union[str, bytes]) -> Report:
    """
    Parses and validates a findings report. Findings with malformed or empty
    patches are dropped and recorded in :attr:`Report.diagnostics`.

    Args:
        document: ``str`` or ``bytes`` -> UTF-8 JSON report.

    Returns:
        :class:`Report`

    Raises:
        SchemaViolation: if the document is not a valid report.
    """
    try:
        if isinstance(document, (bytes, bytearray)):
            document = bytes(document).decode('utf-8')
        raw = RawReport.model_validate_json(document)
    except (ValidationError, ValueError, TypeError, RecursionError) as err:
        raise SchemaViolation(f'invalid findings report: {err}') from None
    if raw.version != REPORT_VERSION:
        raise SchemaViolation(f'unsupported report version {raw.version}, '
                              f'expected {REPORT_VERSION}.')
    diagnostics: List[Diagnostic] = []
    findings = []
    for index, raw_finding in enumerate(raw.findings):
        finding = _convert(index, raw_finding, raw.commit, diagnostics)
        if finding is not None:
            findings.append(finding)
    for diagnostic in diagnostics:
        logger.warning('finding dropped or altered: %s', diagnostic.message)
    return Report(raw.version, raw.run_id, raw.commit, tuple(findings),
                  tuple(diagnostics))


def validate_commit(report: Report, expected: str) -> Report:
    """
    Ensures ``report`` was produced for the ``expected`` revision.

    Returns:
        :class:`Report` -> ``report`` unchanged.

    Raises:
        SchemaViolation: if ``expected`` is empty.
        StaleReport: if the report belongs to another revision.
    """
    if not expected:
        raise SchemaViolation('expected revision id must not be empty.')
    if report.commit != expected:
        raise StaleReport(f'report was produced for {report.commit}, pull '
                          f'request head is {expected}.')
    return report


def load_report(path: str) -> Report:
    """Reads and parses a report file."""
    with open(path, 'rb') as f:
        return parse_report(f.read())
