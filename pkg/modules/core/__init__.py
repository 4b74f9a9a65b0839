"""
Core module for PulseSync
Contains the graph model, delay adversaries, the asynchronous and synchronous
runtimes, settings, metrics and structured logging
"""

from .errors import (
    SimulationError,
    ConfigError,
    GraphError,
    CoverError,
    ProtocolViolation,
    ModelViolation,
    EventCapExceeded,
    NodeHandlerError
)
from .settings import SettingsManager
from .graph import NetworkGraph, GraphSpec, parse_graph_spec, generate, load_graph, bfs_oracle, mst_oracle
from .adversary import AdversarySpec, parse_adversary_spec
from .runtime import RunMetrics, NodeProgram, NodeContext, Envelope, run_async
from .sync_runtime import PulseProgram, PulseContext, SyncMessage, SyncTrace, run_sync
from .metrics import MetricsCollector, get_metrics_collector, is_prometheus_available
from .structured_logging import (
    get_logger,
    get_pulsesync_logger,
    configure_structured_logging,
    LogContext,
    set_context,
    clear_context,
    timed,
    JSONFormatter
)

__all__ = [
    'SimulationError',
    'ConfigError',
    'GraphError',
    'CoverError',
    'ProtocolViolation',
    'ModelViolation',
    'EventCapExceeded',
    'NodeHandlerError',
    'SettingsManager',
    'NetworkGraph',
    'GraphSpec',
    'parse_graph_spec',
    'generate',
    'load_graph',
    'bfs_oracle',
    'mst_oracle',
    'AdversarySpec',
    'parse_adversary_spec',
    'RunMetrics',
    'NodeProgram',
    'NodeContext',
    'Envelope',
    'run_async',
    'PulseProgram',
    'PulseContext',
    'SyncMessage',
    'SyncTrace',
    'run_sync',
    'MetricsCollector',
    'get_metrics_collector',
    'is_prometheus_available',
    # Structured logging
    'get_logger',
    'get_pulsesync_logger',
    'configure_structured_logging',
    'LogContext',
    'set_context',
    'clear_context',
    'timed',
    'JSONFormatter'
]
