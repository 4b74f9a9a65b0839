"""
Prometheus metrics module for PulseSync.

Every driver hands its RunMetrics to the collector, which keeps counters of
runs and messages per category plus the last normalized completion time.
The exposition text is written by `run --metrics-out`.
"""

import logging
from typing import Optional

logger = logging.getLogger(__name__)

try:
    from prometheus_client import (
        CollectorRegistry, Counter, Gauge, Histogram, Info, generate_latest,
    )
    PROMETHEUS_AVAILABLE = True
except ImportError as e:
    logger.warning(f"prometheus_client not installed, metrics are disabled: {e}")
    PROMETHEUS_AVAILABLE = False

    class _NullMetric:
        """Accepts every metric call and records nothing."""

        def __init__(self, *args, **kwargs):
            pass

        def labels(self, *args, **kwargs):
            return self

        def __getattr__(self, name):
            return lambda *args, **kwargs: None

    CollectorRegistry = Counter = Gauge = Histogram = Info = _NullMetric

    def generate_latest(registry=None) -> bytes:
        return b"# prometheus_client not installed\n"


# Dedicated registry: simulations are library calls, not a long-lived service
REGISTRY = CollectorRegistry()

pulsesync_info = Info(
    'pulsesync',
    'PulseSync simulator information',
    registry=REGISTRY,
)

runs_total = Counter(
    'pulsesync_runs_total',
    'Simulation runs finished, by algorithm and status',
    ['algorithm', 'status'],
    registry=REGISTRY,
)

messages_total = Counter(
    'pulsesync_messages_total',
    'Delivered envelopes, by message category',
    ['category'],
    registry=REGISTRY,
)

events_total = Counter(
    'pulsesync_events_total',
    'Processed simulator events',
    ['algorithm'],
    registry=REGISTRY,
)

last_normalized_time = Gauge(
    'pulsesync_last_normalized_time',
    'Normalized completion time (virtual time / tau) of the latest run',
    ['algorithm'],
    registry=REGISTRY,
)

run_seconds = Histogram(
    'pulsesync_run_seconds',
    'Wall-clock duration of simulation runs',
    ['algorithm'],
    buckets=(0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 300.0),
    registry=REGISTRY,
)


class MetricsCollector:
    """Records RunMetrics into the Prometheus registry."""

    def __init__(self):
        try:
            from modules import __version__
            pulsesync_info.info({'version': __version__})
        except Exception as e:
            logger.debug(f"Could not publish version info: {e}")

    def record_run(self, algorithm: str, metrics, wall_seconds: Optional[float] = None,
                   success: bool = True):
        runs_total.labels(algorithm=algorithm, status='success' if success else 'failure').inc()
        if metrics is None:
            return
        for category, count in sorted(metrics.messages_by_category.items()):
            messages_total.labels(category=category).inc(count)
        events_total.labels(algorithm=algorithm).inc(metrics.events)
        last_normalized_time.labels(algorithm=algorithm).set(metrics.normalized_time)
        if wall_seconds is not None:
            run_seconds.labels(algorithm=algorithm).observe(wall_seconds)

    def record_failure(self, algorithm: str):
        runs_total.labels(algorithm=algorithm, status='failure').inc()

    def generate_metrics_text(self) -> str:
        data = generate_latest(REGISTRY)
        return data.decode('utf-8') if isinstance(data, bytes) else data


_collector: Optional[MetricsCollector] = None


def get_metrics_collector() -> MetricsCollector:
    """Process-wide collector instance."""
    global _collector
    if _collector is None:
        _collector = MetricsCollector()
    return _collector


def is_prometheus_available() -> bool:
    return PROMETHEUS_AVAILABLE
