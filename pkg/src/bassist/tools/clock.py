"""
Provides the Clock class, used to time pipeline runs.
"""

import time

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


class Clock:
    """
    Monotonic clock. :meth:`tick` marks a point in time, :meth:`get_dt`
    returns the time between the last two ticks and :meth:`get_time` the time
    since the first tick.
    """
    def __init__(self):
        self._start = None
        self._last = None
        self._dt = 0.0

    @staticmethod
    def now() -> float:
        """``float`` -> current monotonic time in seconds."""
        return time.perf_counter()

    def tick(self) -> None:
        """Marks the current point in time."""
        now = self.now()
        if self._start is None:
            self._start = now
        else:
            self._dt = now - self._last
        self._last = now

    def get_dt(self) -> float:
        """``float`` -> seconds between the last two calls to :meth:`tick`."""
        return self._dt

    def get_time(self) -> float:
        """``float`` -> seconds between the first and last :meth:`tick`."""
        if self._start is None:
            return 0.0
        return self._last - self._start
