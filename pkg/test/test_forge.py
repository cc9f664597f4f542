"""
Unittests for bassist.forge: webhook events, the REST client against the
mock forge and the local dry run forge.
"""

import requests
import pytest

from bassist.diff import FileLines, UnifiedDiff
from bassist.forge.client import ForgeClient
from bassist.forge.events import (CheckEvent, Ignore, parse_check_event,
                                  sign_payload, verify_signature)
from bassist.forge.local import LocalForge
from bassist.policy import extract_fingerprint
from bassist.suggestion import Suggestion, render_comment
from bassist.tools.common import (AnchorRejected, MalformedPayload, NotFound,
                                  PRClosed, Severity, StaleHead,
                                  TransportFailure, Unauthorized,
                                  UnrepresentableChange)

from helpers import (A_CPP_HEAD, CHECK, PR, REPO, check_run_payload,
                     report_json, text)

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


def _comment(start=11, end=11, replacement=('fixed11', )):
    return render_comment(Suggestion('a.cpp', start, end, replacement,
                                     'clang-tidy', 'readability-braces',
                                     Severity.WARNING, 'braces'))


class LosingSession(requests.Session):
    """Session that drops the response of the first POST."""
    def __init__(self):
        super().__init__()
        self.lost = 0

    def request(self, method, url, *args, **kwargs):
        response = super().request(method, url, *args, **kwargs)
        if method == 'POST' and not self.lost:
            self.lost += 1
            raise requests.ConnectionError('response lost')
        return response


# Webhook events

def test_parse_check_event():
    event = parse_check_event(check_run_payload('abc123', 'https://ci/r.json'),
                              CHECK)
    assert event == CheckEvent(REPO, PR, 'abc123', CHECK, 'success',
                               'https://ci/r.json')
    assert event.key == (REPO, PR)
    fallback = parse_check_event(
        check_run_payload('abc123', None).replace(
            b'"status"', b'"output": {"text": " /tmp/r.json "}, "status"'),
        CHECK)
    assert fallback.report_location == '/tmp/r.json'


def test_ignored_events():
    cases = [
        check_run_payload('abc', 'u', conclusion='failure'),
        check_run_payload('abc', 'u', action='created'),
        check_run_payload('abc', 'u', name='unit-tests'),
        check_run_payload('abc', 'u', pr=None),
    ]
    for payload in cases:
        assert isinstance(parse_check_event(payload, CHECK), Ignore)


def test_malformed_events():
    payload = check_run_payload('abc', 'u')
    for bad in (payload[:len(payload) // 2], b'{}',
                check_run_payload('abc', None),
                check_run_payload('', 'u'),
                check_run_payload('abc', 'u', repo='no-owner'),
                check_run_payload('abc', 'u', pr=0)):
        with pytest.raises(MalformedPayload):
            parse_check_event(bad, CHECK)


def test_signatures():
    body = b'{"action": "completed"}'
    signature = sign_payload('s3cret', body)
    assert signature.startswith('sha256=')
    assert verify_signature('s3cret', body, signature)
    assert verify_signature('s3cret', body, signature[len('sha256='):])
    assert verify_signature('s3cret', body, signature.upper()
                            .replace('SHA256=', 'sha256='))
    assert not verify_signature('other', body, signature)
    assert not verify_signature('s3cret', body + b' ', signature)
    assert not verify_signature('', body, signature)
    assert not verify_signature('s3cret', body, None)
    assert not verify_signature('s3cret', body, 'sha256=éé')


# REST client against the mock forge

def test_fetch_pr_diff(client, head_sha):
    diff = client.fetch_pr_diff(REPO, PR)
    assert diff.paths == ('a.cpp', )
    assert len(diff.get('a.cpp').hunks) == 1
    assert client.current_head(REPO, PR) == head_sha
    with pytest.raises(NotFound):
        client.fetch_pr_diff(REPO, 99)


def test_closed_pull(client, mock, head_sha):
    mock.set_state(REPO, PR, 'closed')
    with pytest.raises(PRClosed):
        client.fetch_pr_diff(REPO, PR)
    with pytest.raises(PRClosed):
        client.current_head(REPO, PR)


def test_fetch_files(client, head_sha):
    head = client.fetch_head_file(REPO, head_sha, 'a.cpp')
    assert head == FileLines(A_CPP_HEAD, True)
    assert client.fetch_file(REPO, head_sha, 'a.cpp') \
        == text(A_CPP_HEAD).encode('utf-8')
    with pytest.raises(NotFound):
        client.fetch_head_file(REPO, head_sha, 'missing.cpp')
    with pytest.raises(NotFound):
        client.fetch_head_file(REPO, 'unknown', 'a.cpp')


def test_comment_round_trip(client, mock, head_sha):
    comment = _comment()
    posted = client.post_suggestion_comment(REPO, PR, head_sha, comment)
    assert (posted.file, posted.start_line, posted.end_line) == ('a.cpp', 11,
                                                                 11)
    multi = _comment(11, 12, ('a', 'b'))
    client.post_suggestion_comment(REPO, PR, head_sha, multi)
    mock.add_comment(REPO, PR, 'a.cpp', 11, 'looks good', 'alice')
    listed = client.list_bot_comments(REPO, PR)
    assert [c.body for c in listed] == [comment.body, multi.body]
    assert extract_fingerprint(listed[0].body) == comment.fingerprint
    assert (listed[1].start_line, listed[1].end_line) == (11, 12)
    assert all(c.author == 'bassist[bot]' for c in listed)
    stored = mock.comments(REPO, PR)[1]
    assert (stored['start_line'], stored['line'], stored['side']) == (
        11, 12, 'RIGHT')


def test_comment_rejections(client, mock, head_sha):
    with pytest.raises(AnchorRejected):
        client.post_suggestion_comment(REPO, PR, head_sha, _comment(1, 1))
    with pytest.raises(StaleHead):
        client.post_suggestion_comment(REPO, PR, 'old', _comment())
    assert mock.comments(REPO, PR) == []


def test_transport_retries(client, mock, head_sha):
    mock.fail_next(2)
    assert client.fetch_pr_diff(REPO, PR).paths == ('a.cpp', )
    mock.fail_next(1, status=429, retry_after=0)
    assert client.current_head(REPO, PR) == head_sha
    mock.fail_next(3)
    with pytest.raises(TransportFailure):
        client.current_head(REPO, PR)


def test_no_retry_on_client_errors(server, mock, head_sha):
    client = ForgeClient(server.base_url, 'wrong', 'bassist[bot]',
                         max_attempts=3, backoff=0)
    with pytest.raises(Unauthorized):
        client.current_head(REPO, PR)
    assert len(mock.requests) == 1


def test_lost_response_posts_once(server, mock, head_sha):
    client = ForgeClient(server.base_url, 'test-token', 'bassist[bot]',
                         max_attempts=3, backoff=0, session=LosingSession())
    comment = _comment()
    posted = client.post_suggestion_comment(REPO, PR, head_sha, comment)
    assert extract_fingerprint(posted.body) == comment.fingerprint
    assert len(mock.comments(REPO, PR)) == 1


def test_fetch_report(client, server, mock, tmp_path):
    document = report_json('abc', []).encode('utf-8')
    mock.add_artifact('report.json', document)
    url = f'{server.base_url}/artifacts/report.json'
    assert client.fetch_report(url) == document
    with pytest.raises(NotFound):
        client.fetch_report(f'{server.base_url}/artifacts/other.json')
    seen = len(mock.requests)
    secret = tmp_path / 'server-secret.txt'
    secret.write_bytes(b'TOKEN=hunter2')
    for location in (str(secret), f'file://{secret}', 'ftp://ci/r.json',
                     'http://[broken/r.json', ''):
        with pytest.raises(NotFound):
            client.fetch_report(location)
    assert len(mock.requests) == seen


def test_fetch_report_hosts(server, mock):
    document = report_json('abc', []).encode('utf-8')
    mock.add_artifact('report.json', document)
    url = f'{server.base_url}/artifacts/report.json'
    on_forge = ForgeClient(server.base_url, 'test-token', 'bassist[bot]',
                           timeout=5, report_hosts=['CI.example'])
    assert on_forge.report_hosts == {'ci.example'}
    assert on_forge.fetch_report(url) == document
    elsewhere = ForgeClient('http://forge.invalid', 'test-token',
                            'bassist[bot]', report_hosts=['ci.example'])
    with pytest.raises(NotFound):
        elsewhere.fetch_report(url)
    anywhere = ForgeClient('http://forge.invalid', 'test-token',
                           'bassist[bot]', timeout=5)
    assert anywhere.fetch_report(url) == document


# Mock forge

def test_mock_accept(client, mock, head_sha):
    posted = client.post_suggestion_comment(REPO, PR, head_sha, _comment())
    new_head = mock.accept(REPO, PR, posted.id)
    assert new_head != head_sha
    assert mock.head_sha(REPO, PR) == new_head
    assert mock.head_file(REPO, PR, 'a.cpp')[10] == 'fixed11'
    assert mock.comments(REPO, PR)[0]['resolved'] is True
    assert len(client.list_bot_comments(REPO, PR)) == 1


def test_mock_authentication(mock, head_sha):
    status, _, _ = mock.handle('GET', f'/repos/{REPO}/pulls/{PR}', {}, b'')
    assert status == 401
    status, _, _ = mock.handle(
        'GET', f'/repos/{REPO}/pulls/{PR}',
        {'Authorization': 'Bearer test-token'}, b'')
    assert status == 200
    status, _, _ = mock.handle('DELETE', f'/repos/{REPO}/pulls/{PR}',
                               {'Authorization': 'Bearer test-token'}, b'')
    assert status == 404


# Local dry run forge

def test_local_forge(tmp_path):
    (tmp_path / 'a.cpp').write_text(text(A_CPP_HEAD))
    (tmp_path / 'bin.dat').write_bytes(b'\xff\x00')
    forge = LocalForge(UnifiedDiff(), str(tmp_path), 'abc')
    assert forge.current_head(REPO, PR) == 'abc'
    assert forge.fetch_head_file(REPO, 'abc', 'a.cpp') == FileLines(A_CPP_HEAD)
    with pytest.raises(NotFound):
        forge.fetch_file(REPO, 'abc', '../outside.cpp')
    with pytest.raises(NotFound):
        forge.fetch_file(REPO, 'abc', 'missing.cpp')
    with pytest.raises(UnrepresentableChange):
        forge.fetch_head_file(REPO, 'abc', 'bin.dat')
    comment = _comment()
    forge.post_suggestion_comment(REPO, PR, 'abc', comment)
    listed = forge.list_bot_comments(REPO, PR)
    assert [c.body for c in listed] == [comment.body]
