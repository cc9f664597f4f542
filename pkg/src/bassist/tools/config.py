"""
Provides the Config class to handle service configuration.
"""

import configparser
import os
from typing import List, Optional

from plyer import storagepath

from . import common

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""

CONFIG_NAME = 'bassist.ini'


def _search_dirs() -> List[str]:
    dirs = [os.getcwd()]
    for getter in (storagepath.get_application_dir, storagepath.get_home_dir):
        try:
            dirs.append(getter())
        except (NotImplementedError, OSError):
            continue
    return [d for d in dirs if d]


def _find_config_file() -> str:
    for basedir in _search_dirs():
        candidates = [
            os.path.join(basedir, CONFIG_NAME),
            os.path.join(basedir, '.bassist', CONFIG_NAME),
        ]
        found = [c for c in candidates if os.path.isfile(c)]
        if len(found) > 1:
            raise ValueError(f'found multiple "{CONFIG_NAME}" files in '
                             f'"{basedir}".')
        if found:
            return os.path.abspath(found[0])

    for basedir in _search_dirs():
        if os.access(basedir, os.W_OK):
            basedir = os.path.join(basedir, '.bassist')
            break
    else:
        raise PermissionError('unable to find writable location for config '
                              'file.')
    os.makedirs(basedir, exist_ok=True)
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(common.DEFAULT_CONFIG)
    fpath = os.path.join(basedir, CONFIG_NAME)
    with open(fpath, 'w') as f:
        parser.write(f)
    return fpath


class Config(configparser.ConfigParser):
    """
    ConfigParser preloaded with :data:`~bassist.tools.common.DEFAULT_CONFIG`
    and extended to allow for reloading and saving the configuration.

    Args:
        config_file: Either a valid path to an existing config file or `None` to
            automatically search for one and create a default configuration,
            if no configuration file could be found.
        *args: Optional positional arguments passed on to the parent class.
        **kwargs: Optional keyword arguments passed on to the parent class.
    """
    # pylint: disable=too-many-ancestors
    def __init__(self, config_file: Optional[str], *args, **kwargs):
        kwargs.setdefault('interpolation', None)
        super().__init__(*args, **kwargs)
        self.read_dict(common.DEFAULT_CONFIG)
        self._cfg_path = config_file or _find_config_file()
        if not os.path.isfile(self._cfg_path):
            raise FileNotFoundError(f'config file "{self._cfg_path}" does not '
                                    f'exist.')
        self.read(self._cfg_path)

    def reload(self):
        """Reload the configuration from disk."""
        self.read(self._cfg_path)

    def save(self):
        """Write the configuration to disk."""
        try:
            with open(self._cfg_path, 'w') as f:
                self.write(f)
            return True
        except PermissionError as err:
            if err.errno == 13:
                return False
            raise err

    @property
    def cfg_path(self):
        """Return the path to the configuration file."""
        return self._cfg_path
