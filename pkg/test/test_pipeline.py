"""
Unittests for bassist.pipeline, end to end against the mock forge.
"""

import threading

from hypothesis import assume, given, settings, strategies as st
import pytest

from bassist.diff import FileLines, apply_patch, make_unified_diff
from bassist.diff import parse_unidiff
from bassist.forge.events import CheckEvent
from bassist.forge.local import LocalForge
from bassist.pipeline import PullRequestSerializer, RunOutcome, run_pipeline
from bassist.policy import RepoPolicy
from bassist.relevance import changed_lines, expand_vicinity
from bassist.report import parse_report
from bassist.suggestion import (Suggestion, apply_suggestion,
                                parse_suggestion_body)
from bassist.tools.clock import Clock
from bassist.tools.common import NotFound

from helpers import (A_CPP_HEAD, CHECK, FIX_A_CPP, PR, REPO, finding,
                     file_lines, report_json, text)

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


@pytest.fixture
def publish(server, mock):
    """Serves a findings report and returns the matching check event."""
    def _publish(head, findings, commit=None, pr=PR, name='report.json'):
        mock.add_artifact(name, report_json(commit or head,
                                            findings).encode('utf-8'))
        return CheckEvent(REPO, pr, head, CHECK, 'success',
                          f'{server.base_url}/artifacts/{name}')
    return _publish


def _patch(hunks, path='a.cpp'):
    return f'--- a/{path}\n+++ b/{path}\n{hunks}'


def _accounted(outcome):
    assert outcome.accounted == outcome.runs
    return outcome


def test_one_relevant_fix(client, mock, head_sha, publish):
    outcome = _accounted(run_pipeline(
        publish(head_sha, [finding(FIX_A_CPP)]), RepoPolicy(), client))
    assert outcome.posted == 1 and outcome.runs == 1
    assert outcome.aborted is None
    comment, = mock.comments(REPO, PR)
    assert (comment['path'], comment['line'], comment['start_line']) == (
        'a.cpp', 11, None)
    assert comment['commit_id'] == head_sha
    assert 'clang-tidy' in comment['body']
    assert outcome.comments[0].body == comment['body']


def test_rerun_is_idempotent(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)])
    run_pipeline(event, RepoPolicy(), client)
    again = _accounted(run_pipeline(event, RepoPolicy(), client))
    assert (again.posted, again.deduped) == (0, 1)
    assert len(mock.comments(REPO, PR)) == 1


@pytest.mark.parametrize('hunks', [
    '@@ -11,1 +11,1 @@\n-new11\n+fixed11\n',
    '@@ -12,0 +13,1 @@\n+inserted\n',
    '@@ -11,2 +11,0 @@\n-new11\n-new12\n',
    '@@ -11,3 +11,3 @@\n-new11\n+fixed11\n new12\n-context13\n+fixed13\n',
])
def test_accepting_matches_patch(client, mock, head_sha, publish, hunks):
    patch = _patch(hunks)
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(), client))
    assert len(outcome.comments) == 1
    comment, = mock.comments(REPO, PR)
    mock.accept(REPO, PR, comment['id'])
    expected = apply_patch(FileLines(A_CPP_HEAD),
                           parse_unidiff(patch).get('a.cpp'))
    assert mock.head_file(REPO, PR, 'a.cpp') == expected


def test_equal_fixes_keep_first_reason(client, mock, head_sha, publish):
    findings = [finding(FIX_A_CPP, message='first reason'),
                finding(FIX_A_CPP, message='second reason')]
    outcome = _accounted(run_pipeline(publish(head_sha, findings),
                                      RepoPolicy(), client))
    assert (outcome.posted, outcome.deduped) == (1, 1)
    comment, = mock.comments(REPO, PR)
    assert 'Reason: first reason' in comment['body']
    assert 'second reason' not in comment['body']


def test_local_report_location_refused(client, mock, head_sha, tmp_path):
    path = tmp_path / 'report.json'
    path.write_text(report_json(head_sha, [finding(FIX_A_CPP)]))
    event = CheckEvent(REPO, PR, head_sha, CHECK, 'success', str(path))
    outcome = run_pipeline(event, RepoPolicy(), client)
    assert outcome.aborted == 'forge_error'
    assert outcome.posted == 0 and outcome.runs == 0
    assert mock.comments(REPO, PR) == []


def test_merged_runs(client, mock, head_sha, publish):
    patch = _patch('@@ -11,3 +11,3 @@\n-new11\n+fixed11\n new12\n'
                   '-context13\n+fixed13\n')
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(), client))
    assert outcome.posted == 2 and len(outcome.comments) == 1
    comment, = mock.comments(REPO, PR)
    assert (comment['start_line'], comment['line']) == (11, 13)
    split = _accounted(run_pipeline(
        publish(head_sha, [finding(patch, rule='other')]),
        RepoPolicy(merge_gap=0), client))
    assert split.posted == 2 and len(split.comments) == 2


def test_budget(client, mock, publish):
    base = {'b.cpp': text([f'old{i}' for i in range(1, 31)])}
    head = mock.add_pull(REPO, 8, base,
                         {'b.cpp': text([f'new{i}' for i in range(1, 31)])})
    findings = [finding(_patch(f'@@ -{i},1 +{i},1 @@\n-new{i}\n+fix{i}\n',
                               'b.cpp'))
                for i in range(12, 0, -1)]
    outcome = _accounted(run_pipeline(publish(head, findings, pr=8),
                                      RepoPolicy(), client))
    assert (outcome.posted, outcome.dropped_budget) == (10, 2)
    assert sorted(c['line'] for c in mock.comments(REPO, 8)) == list(
        range(1, 11))


def test_irrelevant_finding(client, mock, head_sha, publish):
    patch = _patch('@@ -3,1 +3,1 @@\n-x\n+y\n', 'b.cpp')
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(), client))
    assert (outcome.posted, outcome.dropped_irrelevant) == (0, 1)
    assert mock.comments(REPO, PR) == []


def test_partial_repair(client, mock, head_sha, publish):
    patch = _patch('@@ -1,1 +1,1 @@\n-line1\n+LINE1\n'
                   '@@ -11,1 +11,1 @@\n-new11\n+fixed11\n')
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(), client))
    assert (outcome.posted, outcome.dropped_irrelevant) == (1, 1)
    assert 'partial_repair' in [d.kind for d in outcome.diagnostics]


@pytest.mark.parametrize('patch, kind', [
    (FIX_A_CPP.replace('-new11', '-WRONG'), 'stale_patch'),
    (_patch('@@ -15,1 +15,1 @@\n-line15\n+line15\n'
            '\\ No newline at end of file\n'), 'final_newline'),
    ('--- /dev/null\n+++ b/a.cpp.orig\n@@ -0,0 +1 @@\n+x\n',
     'unrepresentable_file'),
])
def test_unconvertible(client, mock, head_sha, publish, patch, kind):
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(), client))
    assert (outcome.posted, outcome.dropped_unconvertible) == (0, 1)
    assert kind in [d.kind for d in outcome.diagnostics]


def test_anchor_rejected(client, mock, head_sha, publish):
    patch = _patch('@@ -6,1 +6,1 @@\n-line6\n+LINE6\n')
    outcome = _accounted(run_pipeline(publish(head_sha, [finding(patch)]),
                                      RepoPolicy(vicinity_radius=5), client))
    assert (outcome.posted, outcome.dropped_unconvertible) == (0, 1)
    assert 'anchor_rejected' in [d.kind for d in outcome.diagnostics]


def test_filtered_findings(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP, severity='info'),
                               finding(FIX_A_CPP, tool='autofix')])
    outcome = _accounted(run_pipeline(
        event, RepoPolicy(severity_floor='warning',
                          tool_allowlist=['clang-tidy']), client))
    assert (outcome.findings, outcome.filtered_findings) == (2, 2)
    assert outcome.runs == 0 and mock.comments(REPO, PR) == []


def test_stale_report(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)], commit='deadbeef')
    outcome = _accounted(run_pipeline(event, RepoPolicy(), client))
    assert outcome.aborted == 'stale_report' and outcome.posted == 0
    assert mock.comments(REPO, PR) == []


def test_head_moved(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)])
    mock.push(REPO, PR, {'a.cpp': text(A_CPP_HEAD + ['line16'])})
    outcome = _accounted(run_pipeline(event, RepoPolicy(), client))
    assert outcome.aborted == 'stale_head'
    assert (outcome.posted, outcome.dropped_aborted) == (0, 1)
    assert mock.comments(REPO, PR) == []


def test_closed_pull(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)])
    mock.set_state(REPO, PR, 'merged')
    outcome = _accounted(run_pipeline(event, RepoPolicy(), client))
    assert outcome.aborted == 'stale_head' and outcome.dropped_aborted == 1


def test_forge_unreachable(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)])
    mock.fail_next(10)
    outcome = run_pipeline(event, RepoPolicy(), client)
    assert outcome.aborted == 'forge_error' and outcome.posted == 0


def test_bad_report(client, mock, head_sha, server):
    mock.add_artifact('broken.json', b'{"version": 1')
    event = CheckEvent(REPO, PR, head_sha, CHECK, 'success',
                       f'{server.base_url}/artifacts/broken.json')
    outcome = run_pipeline(event, RepoPolicy(), client)
    assert outcome.aborted == 'schema_violation'


def test_disabled(client, mock, head_sha, publish):
    event = publish(head_sha, [finding(FIX_A_CPP)])
    outcome = run_pipeline(event, RepoPolicy(enabled=False), client)
    assert outcome.aborted == 'disabled' and mock.requests == []


def test_run_complete_logged(client, head_sha, publish, events):
    clock = Clock()
    run_pipeline(publish(head_sha, [finding(FIX_A_CPP)]), RepoPolicy(),
                 client, clock)
    record, = [r for r in events.records if r.getMessage() == 'run_complete']
    assert record.fields['posted'] == 1
    assert record.fields['repo'] == REPO
    assert clock.get_time() >= 0


def test_outcome_abort():
    outcome = RunOutcome(posted=1, deduped=1, runs=5)
    outcome.abort('stale_head', 'head moved')
    assert outcome.dropped_aborted == 3 and outcome.accounted == 5
    assert outcome.diagnostics[-1].kind == 'aborted'
    assert outcome.as_dict()['aborted'] == 'stale_head'


def _event(pr, head):
    return CheckEvent(REPO, pr, head, CHECK, 'success', 'r.json')


def test_serializer_supersedes_queued_events():
    gate, seen = threading.Event(), []

    def handler(event):
        seen.append(event.head_commit)
        if event.head_commit == 'h1':
            gate.wait(5)

    serializer = PullRequestSerializer(handler, max_workers=2)
    assert serializer.submit(_event(1, 'h1')) == 'started'
    assert serializer.submit(_event(1, 'h2')) == 'queued'
    assert serializer.submit(_event(1, 'h3')) == 'superseded'
    gate.set()
    assert serializer.wait_idle(5)
    assert seen == ['h1', 'h3'] and serializer.superseded == 1
    serializer.shutdown()


def test_serializer_runs_pull_requests_concurrently():
    barrier, done = threading.Barrier(2, timeout=5), []

    def handler(event):
        barrier.wait()
        done.append(event.pr_number)

    serializer = PullRequestSerializer(handler, max_workers=2)
    serializer.submit(_event(1, 'a'))
    serializer.submit(_event(2, 'b'))
    assert serializer.wait_idle(10)
    assert sorted(done) == [1, 2]
    serializer.shutdown()


def test_serializer_survives_failures():
    def handler(event):
        raise RuntimeError('boom')

    serializer = PullRequestSerializer(handler, max_workers=1)
    serializer.submit(_event(1, 'a'))
    assert serializer.wait_idle(5)
    assert serializer.submit(_event(1, 'b')) == 'started'
    assert serializer.wait_idle(5)
    serializer.shutdown()


class MemoryForge(LocalForge):
    """Dry run forge serving the head file from memory."""
    def __init__(self, pr_diff, files):
        super().__init__(pr_diff, '.', 'c1')
        self.files = files

    def fetch_head_file(self, repo, commit, path):
        if path not in self.files:
            raise NotFound(path)
        return self.files[path]


@settings(max_examples=150, deadline=None)
@given(file_lines(min_size=1, newline=True), file_lines(min_size=1,
                                                         newline=True),
       file_lines(newline=True), st.integers(0, 5), st.integers(0, 3))
def test_posted_anchors_stay_near_changes(base, head, target, radius, gap):
    pr_diff = parse_unidiff(make_unified_diff('f.c', base, head))
    patch = make_unified_diff('f.c', head, target)
    assume(patch)
    report = parse_report(report_json('c1', [finding(patch)]))
    forge = MemoryForge(pr_diff, {'f.c': head})
    policy = RepoPolicy(vicinity_radius=radius, merge_gap=gap,
                        max_suggestions_per_pr=100)
    event = CheckEvent(REPO, PR, 'c1', CHECK, 'success', 'memory')
    outcome = _accounted(run_pipeline(event, policy, forge, report=report))
    expanded = expand_vicinity(changed_lines(pr_diff), radius)['f.c']
    suggestions = []
    for comment in forge.posted:
        assert set(range(comment.start_line, comment.end_line + 1)) \
            <= expanded
        suggestions.append(Suggestion(
            'f.c', comment.start_line, comment.end_line,
            tuple(parse_suggestion_body(comment.body)), 'accept', 'accept'))
    if outcome.posted == outcome.runs:
        lines = head
        for suggestion in sorted(suggestions, key=lambda s: s.start_line,
                                 reverse=True):
            lines = apply_suggestion(lines, suggestion)
        assert list(lines) == list(target)
