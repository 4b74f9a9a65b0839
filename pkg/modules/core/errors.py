"""
Exception hierarchy for PulseSync.

Drivers raise these; the CLI maps configuration and graph problems to the
usage exit code and everything else to an invariant failure.
"""

from typing import List, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulation stack."""


class ConfigError(SimulationError):
    """Bad experiment configuration or malformed spec string."""


class GraphError(SimulationError):
    """Unsupported graph family, malformed edge list or unusable graph."""


class CoverError(SimulationError):
    """A cover or decomposition failed verification or lacks a needed layer."""


class ProtocolViolation(SimulationError):
    """A protocol-level safety rule was broken at runtime."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


class ModelViolation(SimulationError):
    """A synchronous program is not event-driven or breaks the CONGEST rules."""

    def __init__(self, message: str, node: Optional[int] = None, pulse: Optional[int] = None):
        where = []
        if node is not None:
            where.append(f"node {node}")
        if pulse is not None:
            where.append(f"pulse {pulse}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.node = node
        self.pulse = pulse


class EventCapExceeded(SimulationError):
    """The event cap was reached before quiescence (livelock or bug)."""

    def __init__(self, events: int, ticks: int):
        super().__init__(f"event cap exceeded after {events} events at tick {ticks}")
        self.events = events
        self.ticks = ticks


class NodeHandlerError(SimulationError):
    """A node handler raised; carries the node id and the trailing event trace."""

    def __init__(self, node: int, cause: BaseException, trace_tail: List[str]):
        super().__init__(f"handler failed at node {node}: {cause!r}")
        self.node = node
        self.cause = cause
        self.trace_tail = trace_tail
