"""
In-process event bus for PulseSync.

Simulations publish state changes (deliveries, registrations, Go_Ahead
receipts, admissions) here so invariant monitors can watch a run. Listeners
run synchronously in registration order: a monitor sees every event in the
order the simulator produced it, which keeps runs replayable.
"""

import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

Listener = Callable[[str, Dict[str, Any]], None]


class EventBus:
    """Simple synchronous publish/subscribe bus."""

    def __init__(self):
        self._listeners: List[Listener] = []
        self._lock = threading.Lock()

    def add_listener(self, callback: Listener) -> None:
        """Register a callback invoked on every publish(). Signature: callback(event, data)."""
        with self._lock:
            self._listeners.append(callback)

    def remove_listener(self, callback: Listener) -> None:
        with self._lock:
            try:
                self._listeners.remove(callback)
            except ValueError:
                pass

    @property
    def has_listeners(self) -> bool:
        return bool(self._listeners)

    def publish(self, event: str, data: Optional[Dict[str, Any]] = None) -> None:
        """Invoke every listener with (event, data). Listener exceptions propagate."""
        if not self._listeners:
            return
        with self._lock:
            listeners = list(self._listeners)
        payload = data or {}
        for listener in listeners:
            listener(event, payload)


class EventRecorder:
    """Listener that keeps every event, optionally filtered by name."""

    def __init__(self, *names: str):
        self.names = set(names)
        self.events: List[Tuple[str, Dict[str, Any]]] = []

    def __call__(self, event: str, data: Dict[str, Any]) -> None:
        if not self.names or event in self.names:
            self.events.append((event, dict(data)))

    def of(self, name: str) -> List[Dict[str, Any]]:
        return [d for e, d in self.events if e == name]
