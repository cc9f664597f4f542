"""
In-memory mock forge speaking the same HTTP surface as
:class:`~bassist.forge.client.ForgeClient`, for hermetic end-to-end tests.

Besides the read and comment endpoints, the mock supports accepting a
suggestion (``POST .../comments/{id}/accept``), which commits the suggested
replacement onto the pull request head, and resolving a comment
(``POST .../comments/{id}/resolve``). Findings reports can be served from
``/artifacts/{name}``.
"""

import base64
from dataclasses import dataclass, field
import hashlib
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import itertools
import json
import logging
import re
import threading
from typing import Any, Dict, List, Mapping, Optional, Tuple
import urllib.parse

from ..diff import FileLines, make_unified_diff, parse_unidiff
from ..relevance import changed_lines, expand_vicinity
from ..suggestion import Suggestion, apply_suggestion, parse_suggestion_body
from ..tools.common import AnchorOutOfRange

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

logger = logging.getLogger(__name__)

COMMENTABLE_RADIUS = 3

_REPO = r'/repos/(?P<repo>[^/]+/[^/]+)'
_ROUTES = [
    ('GET', re.compile(_REPO + r'/pulls/(?P<n>\d+)\.diff$'), 'get_diff'),
    ('GET', re.compile(_REPO + r'/pulls/(?P<n>\d+)$'), 'get_pull'),
    ('GET', re.compile(_REPO + r'/contents/(?P<path>.+)$'), 'get_contents'),
    ('GET', re.compile(_REPO + r'/pulls/(?P<n>\d+)/comments$'),
     'get_comments'),
    ('POST', re.compile(_REPO + r'/pulls/(?P<n>\d+)/comments$'),
     'post_comment'),
    ('POST', re.compile(_REPO + r'/pulls/(?P<n>\d+)/comments/(?P<cid>\d+)'
                        r'/(?P<action>accept|resolve)$'), 'post_action'),
    ('GET', re.compile(r'/artifacts/(?P<name>[^/]+)$'), 'get_artifact'),
]


class MockError(Exception):
    """An HTTP error answer of the mock."""
    def __init__(self, status: int, message: str,
                 headers: Optional[Dict[str, str]] = None):
        super().__init__(message)
        self.status = status
        self.headers = headers or {}


def _as_lines(content) -> FileLines:
    if isinstance(content, FileLines):
        return FileLines(content, content.final_newline)
    if isinstance(content, bytes):
        content = content.decode('utf-8')
    if isinstance(content, str):
        return FileLines.from_text(content)
    return FileLines(content)


@dataclass
class MockPull:
    """State of one pull request of the mock."""
    number: int
    base: Dict[str, FileLines]
    head: Dict[str, FileLines]
    head_sha: str
    state: str = 'open'
    comments: List[Dict[str, Any]] = field(default_factory=list)

    def diff_text(self) -> str:
        """``str`` -> base to head diff of the pull request."""
        paths = sorted(set(self.base) | set(self.head))
        return ''.join(
            make_unified_diff(p, self.base.get(p), self.head.get(p))
            for p in paths)


class MockForge:
    """
    Thread safe state of the mock forge.

    Args:
        token: ``str`` -> bearer token requests have to present; empty
            disables authentication.
        bot_login: ``str`` -> login reported for comments posted through the
            API.
    """
    def __init__(self, token: str = 'test-token',
                 bot_login: str = 'bassist[bot]'):
        self.token = token
        self.bot_login = bot_login
        self._lock = threading.RLock()
        self._pulls: Dict[Tuple[str, int], MockPull] = {}
        self._revisions: Dict[Tuple[str, str], Dict[str, FileLines]] = {}
        self._artifacts: Dict[str, bytes] = {}
        self._failures: List[Tuple[int, Optional[float]]] = []
        self._ids = itertools.count(1)
        self.requests: List[Tuple[str, str]] = []

    # Seeding

    def _commit(self, repo: str, files: Mapping[str, FileLines]) -> str:
        blob = json.dumps({p: [list(f), f.final_newline]
                           for p, f in sorted(files.items())})
        sha = hashlib.sha1(f'{repo}:{next(self._ids)}:{blob}'
                           .encode('utf-8')).hexdigest()
        self._revisions[(repo, sha)] = dict(files)
        return sha

    def add_pull(self, repo: str, number: int, base: Mapping[str, Any],
                 head: Mapping[str, Any], state: str = 'open') -> str:
        """
        Seeds a pull request. File contents may be text, bytes or line lists.

        Returns:
            ``str`` -> the head commit id.
        """
        with self._lock:
            base_files = {p: _as_lines(c) for p, c in base.items()}
            head_files = {p: _as_lines(c) for p, c in head.items()}
            self._commit(repo, base_files)
            sha = self._commit(repo, head_files)
            self._pulls[(repo, number)] = MockPull(number, base_files,
                                                   head_files, sha, state)
            return sha

    def push(self, repo: str, number: int, files: Mapping[str, Any]) -> str:
        """
        Pushes a new head commit updating ``files``.

        Returns:
            ``str`` -> the new head commit id.
        """
        with self._lock:
            pull = self._pull(repo, number)
            pull.head = {**pull.head,
                         **{p: _as_lines(c) for p, c in files.items()}}
            pull.head_sha = self._commit(repo, pull.head)
            return pull.head_sha

    def set_state(self, repo: str, number: int, state: str) -> None:
        """Sets the pull request state, e.g. ``closed``."""
        with self._lock:
            self._pull(repo, number).state = state

    def add_artifact(self, name: str, data: bytes) -> None:
        """Serves ``data`` at ``/artifacts/{name}``."""
        with self._lock:
            self._artifacts[name] = bytes(data)

    def add_comment(self, repo: str, number: int, path: str, line: int,
                    body: str, login: str) -> int:
        """Adds a comment authored by ``login``; returns its id."""
        with self._lock:
            pull = self._pull(repo, number)
            comment = self._make_comment(pull, path, line, line, body,
                                         pull.head_sha, login)
            pull.comments.append(comment)
            return comment['id']

    def fail_next(self, count: int = 1, status: int = 503,
                  retry_after: Optional[float] = None) -> None:
        """The next ``count`` requests are answered with ``status``."""
        with self._lock:
            self._failures.extend([(status, retry_after)] * count)

    # Inspection

    def head_sha(self, repo: str, number: int) -> str:
        """``str`` -> current head commit of a pull request."""
        with self._lock:
            return self._pull(repo, number).head_sha

    def head_file(self, repo: str, number: int, path: str) -> FileLines:
        """:class:`~bassist.diff.patch.FileLines` at the current head."""
        with self._lock:
            lines = self._pull(repo, number).head[path]
            return FileLines(lines, lines.final_newline)

    def comments(self, repo: str, number: int) -> List[Dict[str, Any]]:
        """All comments of a pull request as JSON objects."""
        with self._lock:
            return [dict(c) for c in self._pull(repo, number).comments]

    def diff_text(self, repo: str, number: int) -> str:
        """``str`` -> base to head diff of a pull request."""
        with self._lock:
            return self._pull(repo, number).diff_text()

    # Actions

    def accept(self, repo: str, number: int, comment_id: int) -> str:
        """
        Accepts a suggestion: the replacement is committed onto the head.

        Returns:
            ``str`` -> the new head commit id.
        """
        with self._lock:
            pull = self._pull(repo, number)
            comment = self._comment(pull, comment_id)
            replacement = parse_suggestion_body(comment['body'])
            if replacement is None:
                raise MockError(HTTPStatus.UNPROCESSABLE_ENTITY,
                                'comment holds no suggestion')
            path = comment['path']
            start = comment['start_line'] or comment['line']
            suggestion = Suggestion(path, start, comment['line'],
                                    tuple(replacement), 'accept', 'accept')
            try:
                updated = apply_suggestion(pull.head[path], suggestion)
            except (KeyError, AnchorOutOfRange) as err:
                raise MockError(HTTPStatus.CONFLICT, str(err)) from None
            pull.head = {**pull.head, path: updated}
            pull.head_sha = self._commit(repo, pull.head)
            comment['resolved'] = True
            return pull.head_sha

    def resolve(self, repo: str, number: int, comment_id: int) -> None:
        """Marks a comment resolved; it is still listed afterwards."""
        with self._lock:
            self._comment(self._pull(repo, number), comment_id)['resolved'] \
                = True

    # Internals

    def _pull(self, repo: str, number: int) -> MockPull:
        try:
            return self._pulls[(repo, number)]
        except KeyError:
            raise MockError(HTTPStatus.NOT_FOUND,
                            f'no pull request {repo}#{number}') from None

    @staticmethod
    def _comment(pull: MockPull, comment_id: int) -> Dict[str, Any]:
        for comment in pull.comments:
            if comment['id'] == comment_id:
                return comment
        raise MockError(HTTPStatus.NOT_FOUND, f'no comment {comment_id}')

    def _make_comment(self, pull: MockPull, path: str, start: int, line: int,
                      body: str, commit_id: str,
                      login: str) -> Dict[str, Any]:
        return {
            'id': next(self._ids),
            'path': path,
            'start_line': start if start != line else None,
            'line': line,
            'side': 'RIGHT',
            'body': body,
            'commit_id': commit_id,
            'user': {'login': login},
            'resolved': False,
            'pull_number': pull.number,
        }

    def _check_auth(self, headers: Mapping[str, str], path: str) -> None:
        if not self.token or path.startswith('/artifacts/'):
            return
        if headers.get('Authorization') != f'Bearer {self.token}':
            raise MockError(HTTPStatus.UNAUTHORIZED, 'bad credentials')

    def handle(self, method: str, raw_path: str, headers: Mapping[str, str],
               body: bytes) -> Tuple[int, Dict[str, str], bytes]:
        """
        Answers one HTTP request.

        Returns:
            ``Tuple[int, Dict[str, str], bytes]`` -> status, headers, body.
        """
        url = urllib.parse.urlsplit(raw_path)
        path = urllib.parse.unquote(url.path)
        query = dict(urllib.parse.parse_qsl(url.query))
        with self._lock:
            self.requests.append((method, path))
            try:
                if self._failures:
                    status, retry_after = self._failures.pop(0)
                    extra = {} if retry_after is None \
                        else {'Retry-After': str(retry_after)}
                    raise MockError(status, 'injected failure', extra)
                self._check_auth(headers, path)
                for verb, pattern, name in _ROUTES:
                    match = pattern.match(path)
                    if verb == method and match:
                        return getattr(self, f'_route_{name}')(
                            query, body, **match.groupdict())
                raise MockError(HTTPStatus.NOT_FOUND, f'no route {path}')
            except MockError as err:
                payload = json.dumps({'message': str(err)}).encode('utf-8')
                return err.status, {'Content-Type': 'application/json',
                                    **err.headers}, payload

    @staticmethod
    def _json(data: Any, status: int = HTTPStatus.OK):
        return status, {'Content-Type': 'application/json'}, \
            json.dumps(data).encode('utf-8')

    def _route_get_pull(self, query, body, repo, n):
        pull = self._pull(repo, int(n))
        return self._json({'number': pull.number, 'state': pull.state,
                           'merged': pull.state == 'merged',
                           'head': {'sha': pull.head_sha}})

    def _route_get_diff(self, query, body, repo, n):
        text = self._pull(repo, int(n)).diff_text()
        return HTTPStatus.OK, {'Content-Type': 'text/x-diff'}, \
            text.encode('utf-8')

    def _route_get_contents(self, query, body, repo, path):
        files = self._revisions.get((repo, query.get('ref', '')))
        if files is None or path not in files:
            raise MockError(HTTPStatus.NOT_FOUND, f'no file {path}')
        raw = files[path].to_text().encode('utf-8')
        return self._json({'path': path, 'encoding': 'base64',
                           'content': base64.b64encode(raw).decode('ascii')})

    def _route_get_comments(self, query, body, repo, n):
        per_page = min(int(query.get('per_page', 30)), 100)
        comments = self._pull(repo, int(n)).comments[:per_page]
        return self._json([dict(c) for c in comments])

    def _route_post_comment(self, query, body, repo, n):
        pull = self._pull(repo, int(n))
        try:
            data = json.loads(body)
            path, line, text = data['path'], int(data['line']), data['body']
            start = int(data.get('start_line') or line)
            commit_id = data['commit_id']
        except (ValueError, KeyError, TypeError) as err:
            raise MockError(HTTPStatus.BAD_REQUEST, f'bad comment: {err}') \
                from None
        if commit_id != pull.head_sha:
            raise MockError(HTTPStatus.CONFLICT, 'commit_id is not the head')
        if data.get('side', 'RIGHT') != 'RIGHT' or start > line:
            raise MockError(HTTPStatus.UNPROCESSABLE_ENTITY, 'bad anchor')
        lengths = {path: len(pull.head[path])} if path in pull.head else {}
        commentable = expand_vicinity(
            changed_lines(parse_unidiff(pull.diff_text())),
            COMMENTABLE_RADIUS).clamped(lengths)[path]
        if not set(range(start, line + 1)) <= commentable:
            raise MockError(HTTPStatus.UNPROCESSABLE_ENTITY,
                            f'lines {start}..{line} of {path} are not part '
                            f'of the diff')
        comment = self._make_comment(pull, path, start, line, text, commit_id,
                                     self.bot_login)
        pull.comments.append(comment)
        return self._json(comment, HTTPStatus.CREATED)

    def _route_post_action(self, query, body, repo, n, cid, action):
        if action == 'accept':
            sha = self.accept(repo, int(n), int(cid))
            return self._json({'head': {'sha': sha}})
        self.resolve(repo, int(n), int(cid))
        return self._json({'resolved': True})

    def _route_get_artifact(self, query, body, name):
        if name not in self._artifacts:
            raise MockError(HTTPStatus.NOT_FOUND, f'no artifact {name}')
        return HTTPStatus.OK, {'Content-Type': 'application/json'}, \
            self._artifacts[name]


def _handler_for(forge: MockForge):
    class Handler(BaseHTTPRequestHandler):
        """Routes requests into the :class:`MockForge`."""
        protocol_version = 'HTTP/1.1'

        def _dispatch(self):
            length = int(self.headers.get('Content-Length') or 0)
            body = self.rfile.read(length) if length else b''
            status, headers, payload = forge.handle(
                self.command, self.path, self.headers, body)
            self.send_response(int(status))
            for key, value in headers.items():
                self.send_header(key, value)
            self.send_header('Content-Length', str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        do_GET = _dispatch
        do_POST = _dispatch

        def log_message(self, format, *args):  # pylint: disable=redefined-builtin
            logger.debug('mock forge: ' + format, *args)

    return Handler


class MockForgeServer:
    """
    Serves a :class:`MockForge` on a local port in a background thread.

    Args:
        forge: Optional :class:`MockForge`
        host: ``str`` -> address to bind, port is chosen by the OS.
    """
    def __init__(self, forge: Optional[MockForge] = None,
                 host: str = '127.0.0.1'):
        self.forge = forge or MockForge()
        self._server = ThreadingHTTPServer((host, 0), _handler_for(self.forge))
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def base_url(self) -> str:
        """``str`` -> root URL of the running server."""
        host, port = self._server.server_address[:2]
        return f'http://{host}:{port}'

    def start(self) -> 'MockForgeServer':
        """Starts serving in a daemon thread."""
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name='mock-forge', daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        """Stops serving and releases the socket."""
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
            self._thread = None
        self._server.server_close()

    def __enter__(self) -> 'MockForgeServer':
        return self.start()

    def __exit__(self, *unused_args):
        self.stop()
