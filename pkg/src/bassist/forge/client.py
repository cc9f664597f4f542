"""
REST client of the code review forge. The request surface follows the
GitHub pull request API:

* ``GET  /repos/{owner}/{repo}/pulls/{n}``
* ``GET  /repos/{owner}/{repo}/pulls/{n}.diff``
* ``GET  /repos/{owner}/{repo}/contents/{path}?ref={commit}``
* ``GET  /repos/{owner}/{repo}/pulls/{n}/comments``
* ``POST /repos/{owner}/{repo}/pulls/{n}/comments``
"""

import base64
import binascii
import logging
from typing import Any, Dict, Iterable, List, Optional
import urllib.parse

import requests
from tenacity import (RetryCallState, Retrying, retry_if_exception,
                      stop_after_attempt, wait_exponential)

from . import CommentModel, PullModel, ReviewComment
from ..diff import FileLines, UnifiedDiff, parse_unidiff
from ..policy import extract_fingerprint
from ..suggestion import RenderedComment
from ..tools.common import (AnchorRejected, ForgeError, NotFound, PRClosed,
                            StaleHead, TransportFailure, Unauthorized,
                            UnrepresentableChange, split_repo)
from ..tools.log import log_event

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

logger = logging.getLogger(__name__)

PER_PAGE = 100
USER_AGENT = 'bassist/0.1'


def _retry_after(response: requests.Response) -> Optional[float]:
    value = response.headers.get('Retry-After')
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


def raise_for_status(response: requests.Response, what: str) -> None:
    """
    Maps an unsuccessful forge response onto the forge error hierarchy.

    Args:
        response: ``requests.Response``
        what: ``str`` -> description of the request for error messages.
    """
    status = response.status_code
    if status < 400:
        return
    message = f'{what}: HTTP {status} {response.text[:200]!r}'
    if status in (401, 403):
        raise Unauthorized(message)
    if status == 404:
        raise NotFound(message)
    if status == 409:
        raise StaleHead(message)
    if status == 422:
        raise AnchorRejected(message)
    if status == 429 or status >= 500:
        raise TransportFailure(message, _retry_after(response))
    raise ForgeError(message)


class ForgeClient:
    """
    Thread safe forge client. Transport failures are retried with bounded
    exponential backoff, honoring ``Retry-After``; all other errors are
    raised immediately.

    Args:
        base_url: ``str`` -> API root, e.g. ``https://api.github.com``.
        token: ``str`` -> bearer token.
        bot_login: ``str`` -> account name the comments are posted as.
        timeout: ``float`` -> per request timeout in seconds.
        max_attempts: ``int`` -> attempts per operation, including the first.
        backoff: ``float`` -> initial backoff in seconds.
        backoff_max: ``float`` -> upper bound of a single backoff.
        session: Optional ``requests.Session``.
        report_hosts: ``Iterable[str]`` -> hosts reports may be fetched
            from besides the forge, empty for any host.
    """
    def __init__(self, base_url: str, token: str, bot_login: str,
                 timeout: float = 10.0, max_attempts: int = 4,
                 backoff: float = 0.5, backoff_max: float = 8.0,
                 session: Optional[requests.Session] = None,
                 report_hosts: Iterable[str] = ()):
        if max_attempts < 1:
            raise ValueError('max_attempts must be >= 1')
        self.base_url = base_url.rstrip('/')
        self.bot_login = bot_login
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_max = backoff_max
        self.report_hosts = frozenset(h.lower() for h in report_hosts)
        self._exponential = wait_exponential(multiplier=backoff,
                                             max=backoff_max)
        self.session = session or requests.Session()
        self.session.headers.update({
            'Accept': 'application/vnd.github+json',
            'User-Agent': USER_AGENT,
        })
        if token:
            self.session.headers['Authorization'] = f'Bearer {token}'

    # Retry machinery

    def _wait(self, retry_state: RetryCallState) -> float:
        err = retry_state.outcome.exception()
        retry_after = getattr(err, 'retry_after', None)
        if retry_after is not None:
            return min(retry_after, self.backoff_max)
        return self._exponential(retry_state)

    @staticmethod
    def _before_sleep(retry_state: RetryCallState) -> None:
        log_event(logger, logging.WARNING, 'forge_retry',
                  attempt=retry_state.attempt_number,
                  error=str(retry_state.outcome.exception()))

    def _retrying(self) -> Retrying:
        return Retrying(
            retry=retry_if_exception(
                lambda e: isinstance(e, ForgeError) and e.retryable),
            stop=stop_after_attempt(self.max_attempts),
            wait=self._wait,
            before_sleep=self._before_sleep,
            reraise=True,
        )

    def _request(self, method: str, url: str, what: str,
                 **kwargs: Any) -> requests.Response:
        try:
            response = self.session.request(method, url, timeout=self.timeout,
                                            **kwargs)
        except requests.RequestException as err:
            raise TransportFailure(f'{what}: {err}') from None
        raise_for_status(response, what)
        return response

    def _call(self, method: str, path: str, what: str,
              **kwargs: Any) -> requests.Response:
        url = f'{self.base_url}{path}'
        return self._retrying()(self._request, method, url, what, **kwargs)

    @staticmethod
    def _repo_path(repo: str) -> str:
        owner, name = split_repo(repo)
        return f'/repos/{urllib.parse.quote(owner)}/{urllib.parse.quote(name)}'

    # Pull requests

    def fetch_pr(self, repo: str, pr_number: int) -> PullModel:
        """
        Retrieves the state and head commit of a pull request.

        Returns:
            :class:`~bassist.forge.PullModel`
        """
        what = f'pull request {repo}#{pr_number}'
        response = self._call(
            'GET', f'{self._repo_path(repo)}/pulls/{pr_number}', what)
        try:
            data = response.json()
            head = data.get('head') or {}
            return PullModel.model_validate({**data,
                                             'head_sha': head.get('sha', '')})
        except (AttributeError, TypeError, ValueError) as err:
            raise ForgeError(f'{what}: unexpected response {err}') from None

    def current_head(self, repo: str, pr_number: int) -> str:
        """
        ``str`` -> head commit of an open pull request.

        Raises:
            PRClosed: if the pull request is closed or merged.
        """
        pull = self.fetch_pr(repo, pr_number)
        if pull.state != 'open':
            raise PRClosed(f'{repo}#{pr_number} is {pull.state}.')
        return pull.head_sha

    def fetch_pr_diff(self, repo: str, pr_number: int) -> UnifiedDiff:
        """
        Retrieves the base to head diff of an open pull request.

        Returns:
            :class:`~bassist.diff.unidiff.UnifiedDiff`

        Raises:
            NotFound, PRClosed, Unauthorized, TransportFailure
        """
        self.current_head(repo, pr_number)
        response = self._call(
            'GET', f'{self._repo_path(repo)}/pulls/{pr_number}.diff',
            f'diff of {repo}#{pr_number}',
            headers={'Accept': 'application/vnd.github.diff'})
        return parse_unidiff(response.content)

    def fetch_file(self, repo: str, commit: str, path: str) -> bytes:
        """
        ``bytes`` -> raw content of ``path`` at ``commit``.

        Raises:
            NotFound: if the file does not exist at that revision.
        """
        what = f'{repo}:{path}@{commit}'
        response = self._call(
            'GET',
            f'{self._repo_path(repo)}/contents/{urllib.parse.quote(path)}',
            what, params={'ref': commit})
        try:
            return base64.b64decode(response.json()['content'])
        except (ValueError, KeyError, TypeError, binascii.Error) as err:
            raise ForgeError(f'{what}: unexpected response {err}') from None

    def fetch_head_file(self, repo: str, commit: str, path: str) -> FileLines:
        """
        Retrieves the exact content of ``path`` at ``commit``.

        Returns:
            :class:`~bassist.diff.patch.FileLines`

        Raises:
            NotFound: if the file does not exist at that revision.
            UnrepresentableChange: if the file is not UTF-8 text.
        """
        raw = self.fetch_file(repo, commit, path)
        try:
            return FileLines.from_text(raw.decode('utf-8'))
        except UnicodeDecodeError:
            raise UnrepresentableChange(
                f'{repo}:{path}@{commit} is not UTF-8 text.') from None

    # Review comments

    def list_bot_comments(self, repo: str,
                          pr_number: int) -> List[ReviewComment]:
        """
        All review comments of the pull request authored by ``bot_login``,
        resolved ones included.

        Returns:
            ``List[ReviewComment]``
        """
        what = f'comments of {repo}#{pr_number}'
        response = self._call(
            'GET', f'{self._repo_path(repo)}/pulls/{pr_number}/comments',
            what, params={'per_page': PER_PAGE})
        try:
            models = [CommentModel.model_validate(item)
                      for item in response.json()]
        except (ValueError, TypeError) as err:
            raise ForgeError(f'{what}: unexpected response {err}') from None
        return [ReviewComment.from_model(m) for m in models
                if m.user.login == self.bot_login]

    def _post_comment(self, repo: str, pr_number: int,
                      payload: Dict[str, Any]) -> ReviewComment:
        what = f'new comment on {repo}#{pr_number}'
        response = self._request(
            'POST',
            f'{self.base_url}{self._repo_path(repo)}/pulls/{pr_number}'
            f'/comments', what, json=payload)
        try:
            return ReviewComment.from_model(
                CommentModel.model_validate(response.json()))
        except (ValueError, TypeError) as err:
            raise ForgeError(f'{what}: unexpected response {err}') from None

    def post_suggestion_comment(self, repo: str, pr_number: int,
                                head_commit: str,
                                comment: RenderedComment) -> ReviewComment:
        """
        Posts ``comment`` on the head side of the pull request. A retried
        post first looks for the fingerprint among the existing comments, so
        a lost response never produces a second comment.

        Returns:
            :class:`~bassist.forge.ReviewComment`

        Raises:
            StaleHead, AnchorRejected, Unauthorized, TransportFailure
        """
        payload: Dict[str, Any] = {
            'path': comment.file,
            'line': comment.end_line,
            'side': 'RIGHT',
            'body': comment.body,
            'commit_id': head_commit,
        }
        if comment.start_line < comment.end_line:
            payload['start_line'] = comment.start_line
            payload['start_side'] = 'RIGHT'
        for attempt in self._retrying():
            with attempt:
                if attempt.retry_state.attempt_number > 1:
                    for posted in self.list_bot_comments(repo, pr_number):
                        if extract_fingerprint(posted.body) \
                                == comment.fingerprint:
                            return posted
                return self._post_comment(repo, pr_number, payload)
        raise AssertionError('unreachable')  # pragma: no cover

    # Reports

    def fetch_report(self, location: str) -> bytes:
        """
        Downloads a findings report. Only HTTP(S) locations are accepted, on
        the forge itself or, if ``report_hosts`` is set, on one of those
        hosts. The forge token is only sent to the forge.

        Returns:
            ``bytes``

        Raises:
            NotFound: for unusable or disallowed locations.
        """
        on_forge = location.startswith(f'{self.base_url}/')
        try:
            parts = urllib.parse.urlsplit(location)
            host = parts.hostname
        except ValueError:
            host = None
        if host is None or parts.scheme not in ('http', 'https'):
            raise NotFound(f'report {location[:200]!r}: not an http(s) URL.')
        if self.report_hosts and not on_forge \
                and host not in self.report_hosts:
            raise NotFound(f'report {location[:200]!r}: host {host} is not '
                           f'an allowed report host.')
        headers: Dict[str, Optional[str]] = {'Accept': '*/*'}
        if not on_forge:
            headers['Authorization'] = None
        return self._retrying()(self._request, 'GET', location,
                                f'report {location}',
                                headers=headers).content
