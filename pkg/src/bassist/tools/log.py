"""
Structured logging: one event per line, rendered as ``key=value`` pairs so
run counters can be scraped from the output.
"""

import json
import logging
import sys
from typing import Any, Optional, TextIO

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

ROOT_LOGGER = 'bassist'
_SAFE = set('abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789'
            '-_./:@+,[]#')


def format_value(value: Any) -> str:
    """
    Renders a single value for a ``key=value`` pair. Values containing
    anything but a conservative set of characters are JSON quoted.

    Args:
        value: any value.

    Returns:
        ``str``
    """
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return 'null'
    text = str(value)
    if text and set(text) <= _SAFE:
        return text
    return json.dumps(text)


class KeyValueFormatter(logging.Formatter):
    """
    Formats records as ``ts=... level=... logger=... event=...`` followed by
    the fields passed as ``extra={'fields': {...}}``.
    """
    def format(self, record: logging.LogRecord) -> str:
        pairs = [
            ('ts', self.formatTime(record, '%Y-%m-%dT%H:%M:%S')),
            ('level', record.levelname.lower()),
            ('logger', record.name),
            ('event', record.getMessage()),
        ]
        pairs.extend(sorted(getattr(record, 'fields', {}).items()))
        if record.exc_info:
            pairs.append(('exc', self.formatException(record.exc_info)))
        return ' '.join(f'{k}={format_value(v)}' for k, v in pairs)


def log_event(logger: logging.Logger, level: int, event: str,
              **fields: Any) -> None:
    """
    Logs ``event`` with structured ``fields``.

    Args:
        logger: ``logging.Logger`` -> the logger to use.
        level: ``int`` -> logging level.
        event: ``str`` -> event name, rendered as ``event=...``.
        **fields: key/value pairs appended to the line.
    """
    logger.log(level, event, extra={'fields': fields})


def setup_logging(level: str = 'INFO',
                  stream: Optional[TextIO] = None) -> logging.Logger:
    """
    Installs a :class:`KeyValueFormatter` handler on the ``bassist`` logger.
    Calling it again only updates the level.

    Args:
        level: ``str`` -> logging level name.
        stream: Optional ``TextIO`` -> defaults to ``sys.stderr``.

    Returns:
        ``logging.Logger`` -> the configured package logger.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise ValueError(f'unknown log level "{level}"')
    logger.setLevel(numeric)
    for handler in logger.handlers:
        if isinstance(handler.formatter, KeyValueFormatter):
            return logger
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(KeyValueFormatter())
    logger.addHandler(handler)
    return logger
