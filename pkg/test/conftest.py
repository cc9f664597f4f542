"""
pytest fixtures: a running mock forge seeded with the a.cpp pull request and
a client talking to it.
"""

import logging

import pytest

from bassist.forge.client import ForgeClient
from bassist.forge.mock import MockForgeServer
from bassist.tools.log import ROOT_LOGGER

from helpers import A_CPP_BASE, A_CPP_HEAD, PR, REPO, text

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


@pytest.fixture
def server():
    with MockForgeServer() as srv:
        yield srv


@pytest.fixture
def mock(server):
    return server.forge


@pytest.fixture
def client(server):
    return ForgeClient(server.base_url, 'test-token', 'bassist[bot]',
                       timeout=5, max_attempts=3, backoff=0)


@pytest.fixture
def head_sha(mock):
    """Seeds the a.cpp pull request and returns its head commit."""
    return mock.add_pull(REPO, PR, {'a.cpp': text(A_CPP_BASE)},
                         {'a.cpp': text(A_CPP_HEAD)})


@pytest.fixture
def events(caplog):
    """Captures the structured log events of the package."""
    caplog.set_level(logging.DEBUG, logger=ROOT_LOGGER)
    return caplog
