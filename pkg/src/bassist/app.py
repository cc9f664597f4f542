"""
Executable surface: the long running webhook service and the offline dry
run, plus the ``bassist`` console entry point.
"""

import argparse
from collections import OrderedDict
from dataclasses import dataclass, field
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import json
import logging
import os
import sys
import threading
from typing import Any, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple

from .diff import parse_unidiff
from .eventhandler import Delivery, EventHandler
from .forge import Forge
from .forge.client import ForgeClient
from .forge.events import (CHECK_RUN_EVENT, DELIVERY_HEADER, EVENT_HEADER,
                           SIGNATURE_HEADER, CheckEvent, Ignore,
                           parse_check_event, verify_signature)
from .forge.local import LocalForge
from .pipeline import PullRequestSerializer, RunOutcome, run_pipeline
from .policy import RepoPolicy, load_policy_file
from .report import parse_report
from .tools import config
from .tools.clock import Clock
from .tools.common import (DEFAULT_CONFIG, POLICY_FILE_NAME, BassistError,
                           ConfigError, MalformedPayload, NotFound,
                           PolicyError)
from .tools.log import log_event, setup_logging

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2
MAX_DELIVERY_IDS = 10000
MAX_BODY = 25 * 1024 * 1024
DRY_RUN_REPO = 'local/dry-run'


def parse_address(address: str) -> Tuple[str, int]:
    """
    Splits a ``host:port`` listen address.

    Returns:
        ``Tuple[str, int]``
    """
    host, sep, port = address.rpartition(':')
    if not sep or not port.isdigit() or int(port) > 65535:
        raise ValueError(f'expected "host:port", got "{address}"')
    return host.strip('[]') or '0.0.0.0', int(port)


@dataclass
class AppConfig:
    """Validated settings of the application."""
    # pylint: disable=too-many-instance-attributes
    listen_address: str = DEFAULT_CONFIG['base']['listen_address']
    webhook_secret: str = ''
    forge_base_url: str = DEFAULT_CONFIG['forge']['base_url']
    forge_token: str = ''
    bot_login: str = DEFAULT_CONFIG['forge']['bot_login']
    check_name: str = DEFAULT_CONFIG['forge']['check_name']
    timeout: float = float(DEFAULT_CONFIG['forge']['timeout'])
    max_attempts: int = int(DEFAULT_CONFIG['forge']['max_attempts'])
    report_hosts: Tuple[str, ...] = ()
    repro_command: str = DEFAULT_CONFIG['render']['repro_command']
    default_policy: RepoPolicy = field(default_factory=RepoPolicy)
    log_level: str = DEFAULT_CONFIG['base']['log_level']

    @classmethod
    def from_config(cls, cfg: config.Config,
                    environ: Optional[Mapping[str, str]] = None
                    ) -> 'AppConfig':
        """
        Builds the settings from a :class:`~bassist.tools.config.Config`.
        ``FORGE_TOKEN`` and ``WEBHOOK_SECRET`` in ``environ`` override the
        file.

        Raises:
            ConfigError: on malformed values.
            PolicyError: on an invalid ``[policy]`` section.
        """
        environ = os.environ if environ is None else environ
        try:
            return cls(
                listen_address=cfg.get('base', 'listen_address'),
                webhook_secret=environ.get('WEBHOOK_SECRET')
                or cfg.get('forge', 'webhook_secret'),
                forge_base_url=cfg.get('forge', 'base_url'),
                forge_token=environ.get('FORGE_TOKEN')
                or cfg.get('forge', 'token'),
                bot_login=cfg.get('forge', 'bot_login'),
                check_name=cfg.get('forge', 'check_name'),
                timeout=cfg.getfloat('forge', 'timeout'),
                max_attempts=cfg.getint('forge', 'max_attempts'),
                report_hosts=tuple(
                    host.strip().lower() for host in
                    cfg.get('forge', 'report_hosts').split(',')
                    if host.strip()),
                repro_command=cfg.get('render', 'repro_command'),
                default_policy=RepoPolicy.from_config(cfg['policy']),
                log_level=cfg.get('base', 'log_level'),
            )
        except ValueError as err:
            raise ConfigError(f'invalid configuration: {err}') from None

    def validate(self, serve: bool = True) -> 'AppConfig':
        """
        Checks the settings; serve mode needs a secret and a token.

        Raises:
            ConfigError
        """
        try:
            parse_address(self.listen_address)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        if self.max_attempts < 1 or self.timeout <= 0:
            raise ConfigError('timeout and max_attempts must be positive.')
        if serve:
            if not self.webhook_secret:
                raise ConfigError('a webhook secret is required to serve.')
            if not self.forge_token:
                raise ConfigError('a forge token is required to serve.')
            if not self.forge_base_url:
                raise ConfigError('a forge base_url is required to serve.')
        return self


@dataclass
class Systems:
    """Class for keeping track of the various handler objects."""
    event_handler: EventHandler
    serializer: PullRequestSerializer
    forge: Forge


@dataclass
class AppStats:
    """Class for keeping runtime stats of the App."""
    # pylint: disable=too-many-instance-attributes
    clock: Clock
    deliveries: int = 0
    duplicates: int = 0
    rejected: int = 0
    ignored: int = 0
    runs: int = 0
    posted: int = 0
    running: bool = False


class App:
    """
    The webhook service. Verified ``check_run`` deliveries are parsed and
    dispatched to :func:`~bassist.pipeline.run_pipeline`, one run per pull
    request at a time.

    Args:
        app_config: :class:`AppConfig`
        forge: Optional forge implementation, defaults to a
            :class:`~bassist.forge.client.ForgeClient` for the configured
            base URL.
        max_workers: ``int`` -> pull requests processed concurrently.
    """
    def __init__(self, app_config: AppConfig, forge: Optional[Forge] = None,
                 max_workers: int = 4):
        self.__cfg = app_config
        forge = forge or ForgeClient(
            app_config.forge_base_url, app_config.forge_token,
            app_config.bot_login, app_config.timeout, app_config.max_attempts,
            report_hosts=app_config.report_hosts)
        self.__systems = Systems(EventHandler(),
                                 PullRequestSerializer(self.process,
                                                       max_workers),
                                 forge)
        self.__stats = AppStats(Clock())
        self.__seen: 'OrderedDict[str, None]' = OrderedDict()
        self.__lock = threading.Lock()
        self.__server: Optional[ThreadingHTTPServer] = None
        self.__stopped = threading.Event()
        self.event_handler.listen('check_run', CHECK_RUN_EVENT,
                                  self.on_check_run)

    @property
    def config(self) -> AppConfig:
        """:class:`AppConfig` of the running app."""
        return self.__cfg

    @property
    def event_handler(self) -> EventHandler:
        """:class:`~bassist.eventhandler.EventHandler`"""
        return self.__systems.event_handler

    @property
    def serializer(self) -> PullRequestSerializer:
        """:class:`~bassist.pipeline.PullRequestSerializer`"""
        return self.__systems.serializer

    @property
    def forge(self) -> Forge:
        """The forge implementation in use."""
        return self.__systems.forge

    @property
    def stats(self) -> AppStats:
        """:class:`AppStats`"""
        return self.__stats

    @property
    def server_address(self) -> Tuple[str, int]:
        """``Tuple[str, int]`` -> bound address, after :meth:`start`."""
        if self.__server is None:
            raise RuntimeError('the app is not started.')
        return self.__server.server_address[:2]

    # Pipeline

    def resolve_policy(self, repo: str, head: str) -> RepoPolicy:
        """Repository policy at ``head`` over the configured default."""
        return repository_policy(self.forge, repo, head,
                                 self.__cfg.default_policy)

    def process(self, event: CheckEvent) -> Optional[RunOutcome]:
        """Runs the pipeline for one event."""
        try:
            policy = self.resolve_policy(event.repo, event.head_commit)
        except PolicyError as err:
            log_event(logger, logging.ERROR, 'policy_invalid',
                      repo=event.repo, pr=event.pr_number, error=str(err))
            return None
        outcome = run_pipeline(event, policy, self.forge,
                               repro_command=self.__cfg.repro_command)
        with self.__lock:
            self.__stats.runs += 1
            self.__stats.posted += outcome.posted
        return outcome

    def on_check_run(self, event: Delivery) -> None:
        """Parses a ``check_run`` delivery and schedules the pipeline."""
        parsed = parse_check_event(event.payload, self.__cfg.check_name)
        if isinstance(parsed, Ignore):
            with self.__lock:
                self.__stats.ignored += 1
            log_event(logger, logging.INFO, 'delivery_ignored',
                      delivery=event.delivery_id, reason=parsed.reason)
            return
        state = self.serializer.submit(parsed)
        log_event(logger, logging.INFO, 'delivery_scheduled',
                  delivery=event.delivery_id, repo=parsed.repo,
                  pr=parsed.pr_number, head=parsed.head_commit, state=state)

    def receive(self, headers: Mapping[str, str],
                body: bytes) -> Tuple[int, Dict[str, Any]]:
        """
        Handles one webhook delivery.

        Returns:
            ``Tuple[int, Dict[str, Any]]`` -> HTTP status and JSON answer.
        """
        with self.__lock:
            self.__stats.deliveries += 1
        if not verify_signature(self.__cfg.webhook_secret, body,
                                headers.get(SIGNATURE_HEADER)):
            with self.__lock:
                self.__stats.rejected += 1
            log_event(logger, logging.WARNING, 'signature_rejected',
                      delivery=headers.get(DELIVERY_HEADER))
            return HTTPStatus.UNAUTHORIZED, {'status': 'bad signature'}
        delivery_id = headers.get(DELIVERY_HEADER)
        if delivery_id:
            with self.__lock:
                if delivery_id in self.__seen:
                    self.__stats.duplicates += 1
                    return HTTPStatus.OK, {'status': 'duplicate'}
                self.__seen[delivery_id] = None
                while len(self.__seen) > MAX_DELIVERY_IDS:
                    self.__seen.popitem(last=False)
        delivery = Delivery(headers.get(EVENT_HEADER) or '', body, delivery_id)
        if not self.event_handler.handles(delivery.event_type):
            return HTTPStatus.ACCEPTED, {'status': 'ignored'}
        try:
            self.event_handler(delivery)
        except MalformedPayload as err:
            log_event(logger, logging.WARNING, 'payload_malformed',
                      delivery=delivery_id, error=str(err))
            return HTTPStatus.BAD_REQUEST, {'status': 'malformed payload'}
        return HTTPStatus.ACCEPTED, {'status': 'accepted'}

    # Serving

    def start(self) -> Tuple[str, int]:
        """
        Binds the listener and serves in a background thread.

        Returns:
            ``Tuple[str, int]`` -> the bound address.
        """
        self.__server = ThreadingHTTPServer(
            parse_address(self.__cfg.listen_address), _handler_for(self))
        threading.Thread(target=self.__server.serve_forever,
                         name='bassist-http', daemon=True).start()
        self.__stats.running = True
        self.__stats.clock.tick()
        log_event(logger, logging.INFO, 'listening',
                  address='%s:%d' % self.server_address)
        return self.server_address

    def serve(self) -> None:
        """Serves until :meth:`quit` is called or the process is stopped."""
        if self.__server is None:
            self.start()
        try:
            while not self.__stopped.wait(0.5):
                pass
        except KeyboardInterrupt:
            pass
        finally:
            self.quit()

    def quit(self) -> None:
        """Stops serving and waits for running pipelines."""
        if self.__stopped.is_set():
            return
        self.__stopped.set()
        self.__stats.running = False
        if self.__server is not None:
            self.__server.shutdown()
            self.__server.server_close()
            self.__server = None
        self.serializer.shutdown(wait=True)
        self.__stats.clock.tick()
        log_event(logger, logging.INFO, 'stopped',
                  uptime=round(self.__stats.clock.get_time(), 3),
                  deliveries=self.__stats.deliveries, runs=self.__stats.runs,
                  posted=self.__stats.posted)


def _handler_for(app: App):
    class Handler(BaseHTTPRequestHandler):
        """Webhook and health endpoints."""
        def _answer(self, status: int, data: Dict[str, Any]) -> None:
            payload = json.dumps(data).encode('utf-8')
            self.send_response(int(status))
            self.send_header('Content-Type', 'application/json')
            self.send_header('Content-Length', str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):  # pylint: disable=invalid-name
            if self.path.split('?')[0] == '/healthz':
                self._answer(HTTPStatus.OK, {'status': 'ok'})
            else:
                self._answer(HTTPStatus.NOT_FOUND, {'status': 'not found'})

        def do_POST(self):  # pylint: disable=invalid-name
            try:
                length = int(self.headers.get('Content-Length') or 0)
            except ValueError:
                length = -1
            if not 0 <= length <= MAX_BODY:
                self._answer(HTTPStatus.BAD_REQUEST, {'status': 'bad length'})
                return
            body = self.rfile.read(length)
            self._answer(*app.receive(self.headers, body))

        def log_message(self, format, *args):  # pylint: disable=redefined-builtin
            logger.debug('http: ' + format, *args)

    return Handler


# Dry run

def repository_policy(forge: Forge, repo: str, head: str,
                      default: RepoPolicy) -> RepoPolicy:
    """
    Reads ``.bassist.toml`` from the head revision; ``default`` applies to
    keys it does not set or if there is none.

    Raises:
        PolicyError: if the repository policy file is invalid.
    """
    try:
        data = forge.fetch_file(repo, head, POLICY_FILE_NAME)
    except NotFound:
        return default
    return RepoPolicy.from_toml(data, default)


def dry_run(pr_diff_path: str, head_tree_path: str, report_path: str,
            policy_path: Optional[str] = None,
            repro_command: str = DEFAULT_CONFIG['render']['repro_command'],
            default_policy: Optional[RepoPolicy] = None
            ) -> Tuple[RunOutcome, Dict[str, Any]]:
    """
    Previews what the service would post, without any network access.

    Args:
        pr_diff_path: ``str`` -> file with the pull request diff.
        head_tree_path: ``str`` -> directory with the head revision.
        report_path: ``str`` -> findings report.
        policy_path: Optional ``str`` -> policy file to apply instead of the
            ``.bassist.toml`` of the head tree.
        repro_command: ``str`` -> reproduction hint template.
        default_policy: Optional :class:`~bassist.policy.RepoPolicy`

    Returns:
        ``Tuple[RunOutcome, Dict[str, Any]]`` -> outcome and the listing.

    Raises:
        SchemaViolation, MalformedDiff, PolicyError, OSError
    """
    with open(report_path, 'rb') as f:
        report = parse_report(f.read())
    with open(pr_diff_path, 'rb') as f:
        pr_diff = parse_unidiff(f.read())
    if not os.path.isdir(head_tree_path):
        raise NotADirectoryError(f'head tree "{head_tree_path}" is not a '
                                 f'directory')
    forge = LocalForge(pr_diff, head_tree_path, report.commit)
    policy = default_policy or RepoPolicy()
    if policy_path:
        policy = load_policy_file(policy_path, policy)
    else:
        policy = repository_policy(forge, DRY_RUN_REPO, report.commit, policy)
    event = CheckEvent(DRY_RUN_REPO, 1, report.commit, 'dry-run', 'success',
                       report_path)
    outcome = run_pipeline(event, policy, forge, report=report,
                           repro_command=repro_command)
    listing = {
        'suggestions': [
            {'file': c.file, 'start_line': c.start_line,
             'end_line': c.end_line, 'fingerprint': c.fingerprint,
             'body': c.body}
            for c in outcome.comments
        ],
        'outcome': outcome.as_dict(),
        'diagnostics': [d.as_dict() for d in outcome.diagnostics],
    }
    return outcome, listing


def format_listing(listing: Dict[str, Any], fmt: str = 'json') -> str:
    """Renders a dry run listing as ``json`` or ``text``."""
    if fmt == 'json':
        return json.dumps(listing, indent=2, sort_keys=True)
    lines: List[str] = []
    for item in listing['suggestions']:
        lines.append(f"== {item['file']}:{item['start_line']}-"
                     f"{item['end_line']} [{item['fingerprint'][:12]}]")
        lines.append(item['body'])
        lines.append('')
    lines.append(' '.join(f'{k}={v}' for k, v in
                          sorted(listing['outcome'].items())))
    return '\n'.join(lines)


# Console entry point

def build_parser() -> argparse.ArgumentParser:
    """``argparse.ArgumentParser`` of the ``bassist`` command."""
    parser = argparse.ArgumentParser(
        prog='bassist',
        description='Posts tool generated fixes as suggested changes on '
                    'pull requests.')
    parser.add_argument('--log-level', default=None,
                        help='logging level, overrides the configuration')
    sub = parser.add_subparsers(dest='command', required=True)
    serve = sub.add_parser('serve', help='run the webhook service')
    serve.add_argument('--config', default=None,
                       help=f'path to {config.CONFIG_NAME}')
    suggest = sub.add_parser('suggest', help='preview suggestions offline')
    suggest.add_argument('--pr-diff', required=True)
    suggest.add_argument('--head-tree', required=True)
    suggest.add_argument('--report', required=True)
    suggest.add_argument('--policy', default=None)
    suggest.add_argument('--config', default=None,
                         help=f'path to {config.CONFIG_NAME} with the '
                              f'[policy] defaults of the service')
    suggest.add_argument('--format', choices=('json', 'text'), default='json')
    return parser


def _setup_logging(level: str) -> None:
    try:
        setup_logging(level)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _load_config(path: Optional[str]) -> AppConfig:
    try:
        cfg = config.Config(path)
    except (OSError, ValueError) as err:
        raise ConfigError(str(err)) from None
    return AppConfig.from_config(cfg)


def _serve(args: argparse.Namespace) -> int:
    app_config = _load_config(args.config).validate(serve=True)
    _setup_logging(args.log_level or app_config.log_level)
    app = App(app_config)
    try:
        app.start()
    except OSError as err:
        log_event(logger, logging.ERROR, 'bind_failed',
                  address=app_config.listen_address, error=str(err))
        return EXIT_FATAL
    app.serve()
    return EXIT_OK


def _suggest(args: argparse.Namespace, stdout: TextIO) -> int:
    _setup_logging(args.log_level or 'WARNING')
    app_config = AppConfig()
    if args.config:
        app_config = _load_config(args.config).validate(serve=False)
    try:
        _, listing = dry_run(args.pr_diff, args.head_tree, args.report,
                             args.policy, app_config.repro_command,
                             app_config.default_policy)
    except OSError as err:
        print(f'bassist: {err}', file=sys.stderr)
        return EXIT_USAGE
    stdout.write(format_listing(listing, args.format) + '\n')
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None,
         stdout: Optional[TextIO] = None) -> int:
    """
    Console entry point.

    Returns:
        ``int`` -> exit code: 0 success, 2 usage, 3 schema violation, 4 diff
        parse failure, 5 invalid policy, 1 anything else fatal.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code else EXIT_OK
    try:
        if args.command == 'serve':
            return _serve(args)
        return _suggest(args, stdout or sys.stdout)
    except BassistError as err:
        print(f'bassist: {type(err).__name__}: {err}', file=sys.stderr)
        return err.exit_code
