"""
Provides a simplistic EventHandler class to dispatch webhook deliveries to
named callbacks.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

__author__ = 'Tiziano Bettio'
__license__ = 'MIT'
__version__ = '0.1'
__copyright__ = """Copyright (c) 2020 Tiziano Bettio

Released under the MIT license, see LICENSE.md for details."""


@dataclass(frozen=True)
class Delivery:
    """One webhook delivery as received."""
    event_type: str
    payload: bytes
    delivery_id: Optional[str] = None


class EventHandler:
    """
    Basic EventHandler to coordinate webhook deliveries.
    """
    def __init__(self):
        self._events: Dict[str, Dict[str, int]] = {}
        self._unique: Dict[str, Tuple[Callable, Tuple, Dict[str, Any]]] = {}

    def listen(self, name: str, event_type: str, callback: Callable,
               *args, **kwargs) -> None:
        """
        Adds a callback to be executed for every delivery of ``event_type``.
        An optional `priority` can be specified as keyword argument, to set a
        priority for this event (default=0), higher priority gets called
        first.

        Args:
            name: Unique name of the event
            event_type: webhook event type, e.g. ``check_run``
            callback: Method to execute. Must provide ``event`` as named
                argument, it receives the :class:`Delivery`.
            args: optional positional arguments to pass to ``callback``.
            kwargs: optional keyword arguments to pass to ``callback``.

        .. warning::
            The `priority` keyword argument, if specified, will be filtered out
            of the keyword arguments that get passed on to your callback!
        """
        if name in self._unique:
            raise ValueError('An event with this name already exists.')
        priority = kwargs.pop('priority', 0)
        self._events.setdefault(event_type, {})[name] = priority
        self._unique[name] = (callback, args, kwargs)

    def forget(self, name: str) -> None:
        """
        Removes event from the EventHandler.

        Args:
            name: ``str`` unique name of the event to be removed.
        """
        for event_type in list(self._events):
            self._events[event_type].pop(name, None)
            if not self._events[event_type]:
                self._events.pop(event_type)
        self._unique.pop(name, None)

    def handles(self, event_type: str) -> bool:
        """``bool`` -> whether any callback listens for ``event_type``."""
        return event_type in self._events

    def __call__(self, delivery: Delivery) -> int:
        """
        Executes the callbacks listening for the type of ``delivery``.

        Returns:
            ``int`` -> number of callbacks executed.
        """
        if delivery.event_type not in self._events:
            return 0
        return self._exec_event(delivery)

    def _exec_event(self, delivery: Delivery) -> int:
        listeners = self._events[delivery.event_type]
        names = sorted(listeners, key=lambda x: listeners[x], reverse=True)
        for name in names:
            meth, args, kwargs = self._unique[name]
            meth(*args, **kwargs, event=delivery)
        return len(names)
