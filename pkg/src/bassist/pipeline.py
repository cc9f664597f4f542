"""
Orchestrates one run per check event: report -> findings -> relevance ->
conversion -> policy -> delivery.

Every change run derived from a surviving finding ends up in exactly one of
the :class:`RunOutcome` counters ``posted``, ``deduped``, ``dropped_budget``,
``dropped_irrelevant``, ``dropped_unconvertible`` or ``dropped_aborted``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

from .diff import ChangeRun, FileDiff, FileLines, apply_patch
from .diff import extract_change_runs
from .forge import Forge
from .forge.events import CheckEvent
from .policy import RepoPolicy, budget, dedup, fingerprints_of
from .policy import filter_findings
from .relevance import (ChangedLineSet, changed_lines, expand_vicinity,
                        is_relevant)
from .report import Finding, Report, parse_report, validate_commit
from .suggestion import (DEFAULT_REPRO_COMMAND, RenderedComment, Suggestion,
                         merge_runs, render_comment, to_suggestion)
from .tools.clock import Clock
from .tools.common import (AnchorOutOfRange, AnchorRejected, ContextMismatch,
                           Diagnostic, ForgeError, MalformedDiff, NotFound,
                           PRClosed, SchemaViolation, StaleHead, StaleReport,
                           UnrepresentableChange)
from .tools.log import log_event

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

logger = logging.getLogger(__name__)

COUNTERS = ('posted', 'deduped', 'dropped_budget', 'dropped_irrelevant',
            'dropped_unconvertible', 'dropped_aborted')


@dataclass
class RunOutcome:
    """Counters and diagnostics of one pipeline run."""
    # pylint: disable=too-many-instance-attributes
    posted: int = 0
    deduped: int = 0
    dropped_budget: int = 0
    dropped_irrelevant: int = 0
    dropped_unconvertible: int = 0
    dropped_aborted: int = 0
    runs: int = 0
    findings: int = 0
    filtered_findings: int = 0
    diagnostics: List[Diagnostic] = field(default_factory=list)
    comments: List[RenderedComment] = field(default_factory=list)
    aborted: Optional[str] = None

    @property
    def accounted(self) -> int:
        """``int`` -> sum of all counters."""
        return sum(getattr(self, name) for name in COUNTERS)

    def diagnose(self, kind: str, message: str, **fields: Any) -> None:
        """Records a :class:`~bassist.tools.common.Diagnostic`."""
        self.diagnostics.append(Diagnostic(kind, message, fields))
        log_event(logger, logging.INFO, 'diagnostic', kind=kind,
                  message=message, **fields)

    def abort(self, reason: str, message: str) -> 'RunOutcome':
        """Marks every run not accounted for yet as aborted."""
        self.aborted = reason
        self.dropped_aborted += self.runs - self.accounted
        self.diagnose('aborted', message, reason=reason)
        return self

    def as_dict(self) -> Dict[str, Any]:
        """Counters as plain ``dict``."""
        data: Dict[str, Any] = {name: getattr(self, name) for name in COUNTERS}
        data.update(runs=self.runs, findings=self.findings,
                    filtered_findings=self.filtered_findings,
                    aborted=self.aborted)
        return data


@dataclass
class _Candidate:
    suggestion: Suggestion
    comment: RenderedComment


class _Run:
    """State of a single pipeline run."""
    def __init__(self, event: CheckEvent, policy: RepoPolicy, forge: Forge,
                 repro_command: str):
        self.event = event
        self.policy = policy
        self.forge = forge
        self.repro_command = repro_command
        self.outcome = RunOutcome()
        self.expanded = ChangedLineSet()
        self._heads: Dict[str, FileLines] = {}

    def head_file(self, path: str) -> FileLines:
        if path not in self._heads:
            self._heads[path] = self.forge.fetch_head_file(
                self.event.repo, self.event.head_commit, path)
        return self._heads[path]

    def head_length(self, path: str) -> Optional[int]:
        """Line count of a touched head file, ``None`` if unknown."""
        if path not in self.expanded:
            return None
        try:
            return len(self.head_file(path))
        except NotFound:
            return None

    def unconvertible(self, count: int, kind: str, message: str,
                      **fields: Any) -> None:
        self.outcome.dropped_unconvertible += count
        self.outcome.diagnose(kind, message, **fields)

    def convert_file(self, finding: Finding,
                     file_diff: FileDiff) -> List[_Candidate]:
        """Suggestions for the relevant runs of one file of a finding."""
        outcome, where = self.outcome, {'tool': finding.tool,
                                        'rule': finding.rule,
                                        'file': file_diff.path}
        runs = extract_change_runs(file_diff)
        if file_diff.is_binary:
            outcome.diagnose('binary_patch', 'binary changes cannot be '
                             'suggested', **where)
        if not runs:
            return []
        if file_diff.is_rename or file_diff.is_copy \
                or file_diff.is_new_file or file_diff.is_deleted_file:
            self.unconvertible(len(runs), 'unrepresentable_file',
                               'file level changes cannot be suggested',
                               **where)
            return []
        length = self.head_length(file_diff.path)
        relevant = [r for r in runs if is_relevant(r, self.expanded, length)]
        outcome.dropped_irrelevant += len(runs) - len(relevant)
        if not relevant:
            return []
        if len(relevant) < len(runs):
            outcome.diagnose('partial_repair', 'only part of the repair '
                             'touches the pull request', **where,
                             relevant=len(relevant), total=len(runs))
        try:
            head = self.head_file(file_diff.path)
            patched = apply_patch(head, file_diff)
        except (ContextMismatch, UnrepresentableChange) as err:
            self.unconvertible(len(relevant), 'stale_patch', str(err),
                               **where)
            return []
        except NotFound as err:
            self.unconvertible(len(relevant), 'missing_file', str(err),
                               **where)
            return []
        if patched.final_newline != head.final_newline:
            keep = [r for r in relevant if not r.touches_eof]
            if len(keep) < len(relevant):
                self.unconvertible(len(relevant) - len(keep),
                                   'final_newline', 'changes of the final '
                                   'newline cannot be suggested', **where)
            relevant = keep
        return self._suggest(finding, relevant, head, where)

    def _suggest(self, finding: Finding, runs: List[ChangeRun],
                 head: FileLines, where: Dict[str, Any]) -> List[_Candidate]:
        merged = merge_runs(runs, head, self.policy.merge_gap,
                            lambda fused: is_relevant(
                                fused, self.expanded, len(head)))
        candidates = []
        for run in merged:
            try:
                suggestion = to_suggestion(run, head, finding.meta)
            except AnchorOutOfRange as err:
                self.unconvertible(run.run_count, 'anchor_out_of_range',
                                   str(err), **where)
                continue
            candidates.append(_Candidate(
                suggestion, render_comment(suggestion, self.repro_command)))
        return candidates

    def deliver(self, candidates: List[_Candidate]) -> None:
        """Dedup, budget, head re-check and posting."""
        event, outcome = self.event, self.outcome
        posted = set(fingerprints_of(
            c.body for c in self.forge.list_bot_comments(event.repo,
                                                         event.pr_number)))
        by_fingerprint: Dict[str, _Candidate] = {}
        for candidate in candidates:
            by_fingerprint.setdefault(candidate.suggestion.fingerprint,
                                      candidate)
        fresh = dedup([c.suggestion for c in candidates], posted)
        outcome.deduped += sum(c.suggestion.run_count for c in candidates) \
            - sum(s.run_count for s in fresh)
        decision = budget(fresh, self.policy)
        if decision.dropped:
            outcome.dropped_budget += sum(s.run_count
                                          for s, _ in decision.dropped)
            log_event(logger, logging.INFO, 'budget_dropped',
                      repo=event.repo, pr=event.pr_number,
                      count=len(decision.dropped),
                      limit=self.policy.max_suggestions_per_pr,
                      fingerprints=','.join(s.fingerprint[:12]
                                            for s, _ in decision.dropped))
        head = self.forge.current_head(event.repo, event.pr_number)
        if head != event.head_commit:
            raise StaleHead(f'head moved from {event.head_commit} to {head}.')
        for suggestion in decision.accepted:
            comment = by_fingerprint[suggestion.fingerprint].comment
            try:
                self.forge.post_suggestion_comment(
                    event.repo, event.pr_number, event.head_commit, comment)
            except AnchorRejected as err:
                self.unconvertible(suggestion.run_count, 'anchor_rejected',
                                   str(err), file=suggestion.file,
                                   start_line=suggestion.start_line,
                                   end_line=suggestion.end_line)
                continue
            outcome.posted += suggestion.run_count
            outcome.comments.append(comment)


def run_pipeline(event: CheckEvent, policy: RepoPolicy, forge: Forge,
                 clock: Optional[Clock] = None, report: Optional[Report] = None,
                 repro_command: str = DEFAULT_REPRO_COMMAND) -> RunOutcome:
    """
    Executes one end-to-end run for ``event``. Stale reports, moved heads,
    closed pull requests and exhausted forge retries abort the run; already
    posted comments stand and their fingerprints make the next run safe.

    Args:
        event: :class:`~bassist.forge.events.CheckEvent`
        policy: :class:`~bassist.policy.RepoPolicy`
        forge: object implementing :class:`~bassist.forge.Forge`.
        clock: Optional :class:`~bassist.tools.clock.Clock` for timing.
        report: Optional :class:`~bassist.report.Report` -> already parsed
            report, otherwise it is fetched from ``event.report_location``.
        repro_command: ``str`` -> template of the reproduction hint.

    Returns:
        :class:`RunOutcome`
    """
    clock = clock or Clock()
    clock.tick()
    run = _Run(event, policy, forge, repro_command)
    outcome = run.outcome
    try:
        if not policy.enabled:
            outcome.aborted = 'disabled'
        else:
            _execute(run, report)
    except StaleReport as err:
        outcome.abort('stale_report', str(err))
    except SchemaViolation as err:
        outcome.abort('schema_violation', str(err))
    except MalformedDiff as err:
        outcome.abort('malformed_pr_diff', str(err))
    except (StaleHead, PRClosed) as err:
        outcome.abort('stale_head', str(err))
    except ForgeError as err:
        outcome.abort('forge_error', str(err))
    clock.tick()
    log_event(logger, logging.INFO, 'run_complete', repo=event.repo,
              pr=event.pr_number, head=event.head_commit,
              duration=round(clock.get_time(), 3),
              diagnostics=len(outcome.diagnostics), **outcome.as_dict())
    return outcome


def _execute(run: _Run, report: Optional[Report]) -> None:
    event, outcome = run.event, run.outcome
    if report is None:
        report = parse_report(run.forge.fetch_report(event.report_location))
    outcome.diagnostics.extend(report.diagnostics)
    validate_commit(report, event.head_commit)
    outcome.findings = len(report.findings)
    findings = filter_findings(report.findings, run.policy)
    outcome.filtered_findings = outcome.findings - len(findings)
    outcome.runs = sum(len(extract_change_runs(file_diff))
                       for finding in findings for file_diff in finding.patch)
    pr_diff = run.forge.fetch_pr_diff(event.repo, event.pr_number)
    run.expanded = expand_vicinity(changed_lines(pr_diff),
                                   run.policy.vicinity_radius)
    candidates = []
    for finding in findings:
        for file_diff in finding.patch:
            candidates.extend(run.convert_file(finding, file_diff))
    run.deliver(candidates)


EventKey = Tuple[str, int]


class PullRequestSerializer:
    """
    Runs ``handler`` for events on a thread pool, at most one run per pull
    request at a time. An event arriving while its pull request is busy is
    queued; a newer queued event supersedes an older one.

    Args:
        handler: ``Callable[[CheckEvent], Any]`` -> e.g. a pipeline run.
        max_workers: ``int`` -> pull requests processed concurrently.
    """
    def __init__(self, handler: Callable[[CheckEvent], Any],
                 max_workers: int = 4):
        self._handler = handler
        self._executor = ThreadPoolExecutor(max_workers,
                                            thread_name_prefix='bassist-run')
        self._lock = threading.Lock()
        self._idle = threading.Condition(self._lock)
        self._active: Set[EventKey] = set()
        self._pending: Dict[EventKey, CheckEvent] = {}
        self.superseded = 0

    def submit(self, event: CheckEvent) -> str:
        """
        Schedules ``event``.

        Returns:
            ``str`` -> ``started``, ``queued`` or ``superseded`` (queued,
            replacing an older queued event).
        """
        key = event.key
        with self._lock:
            if key in self._active:
                state = 'queued'
                if key in self._pending:
                    self.superseded += 1
                    state = 'superseded'
                    log_event(logger, logging.INFO, 'event_superseded',
                              repo=event.repo, pr=event.pr_number,
                              old=self._pending[key].head_commit,
                              new=event.head_commit)
                self._pending[key] = event
                return state
            self._active.add(key)
        self._executor.submit(self._work, event)
        return 'started'

    def _work(self, event: CheckEvent) -> None:
        key = event.key
        while True:
            try:
                self._handler(event)
            except Exception:  # pylint: disable=broad-except
                logger.exception('pipeline run failed for %s#%d', *key)
            with self._lock:
                event = self._pending.pop(key, None)
                if event is None:
                    self._active.discard(key)
                    self._idle.notify_all()
                    return

    def wait_idle(self, timeout: Optional[float] = None) -> bool:
        """``bool`` -> ``True`` once no run is active or queued."""
        with self._idle:
            return self._idle.wait_for(lambda: not self._active, timeout)

    def shutdown(self, wait: bool = True) -> None:
        """Stops accepting work."""
        self._executor.shutdown(wait=wait)


__all__ = ['PullRequestSerializer', 'RunOutcome', 'run_pipeline']
