"""
Tests for the Prometheus collector, structured logging and the event bus.
"""

import json
import logging

import pytest

from modules.core.events import EventBus, EventRecorder
from modules.core.metrics import MetricsCollector, get_metrics_collector, is_prometheus_available
from modules.core.runtime import RunMetrics
from modules.core.structured_logging import (
    JSONFormatter, LogContext, RunFieldsFormatter, clear_context, get_context, get_pulsesync_logger, set_context,
    timed,
)

pytestmark = [pytest.mark.unit]


def _record(msg='hello', level=logging.INFO, **extra):
    record = logging.LogRecord('pulsesync.test', level, __file__, 10, msg, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestMetricsCollector:

    def test_singleton(self):
        assert get_metrics_collector() is get_metrics_collector()

    @pytest.mark.skipif(not is_prometheus_available(), reason="prometheus_client not installed")
    def test_exposition_text(self):
        metrics = RunMetrics(messages_total=3, events=7, normalized_time=2.5)
        metrics.messages_by_category.update({'alg': 2, 'reg': 1})
        collector = MetricsCollector()
        collector.record_run('unit-test', metrics, wall_seconds=0.02, success=True)
        collector.record_failure('unit-test')
        text = collector.generate_metrics_text()
        assert 'pulsesync_runs_total{algorithm="unit-test",status="success"}' in text
        assert 'pulsesync_runs_total{algorithm="unit-test",status="failure"}' in text
        assert 'pulsesync_last_normalized_time{algorithm="unit-test"} 2.5' in text
        assert 'pulsesync_messages_total{category="reg"}' in text

    def test_none_metrics_only_counts_the_run(self):
        collector = MetricsCollector()
        collector.record_run('unit-test-none', None)
        assert isinstance(collector.generate_metrics_text(), str)


class TestJSONFormatter:

    def test_fields_and_extras(self):
        formatter = JSONFormatter(include_hostname=False, include_pid=False)
        entry = json.loads(formatter.format(_record(messages=12, iteration=3)))
        assert entry['message'] == 'hello'
        assert entry['level'] == 'info'
        assert entry['logger'] == 'pulsesync.test'
        assert entry['messages'] == 12
        assert entry['iteration'] == 3
        assert 'host' not in entry
        assert 'source' not in entry

    def test_warning_carries_source(self):
        entry = json.loads(JSONFormatter().format(_record(level=logging.WARNING)))
        assert entry['source']['line'] == 10
        assert 'pid' in entry

    def test_unserializable_extra_becomes_string(self):
        entry = json.loads(JSONFormatter(False, False).format(_record(failed={1, 2})))
        assert entry['failed'] == str({1, 2})

    def test_context_fields_are_merged(self):
        formatter = JSONFormatter(False, False)
        with LogContext(algorithm='bfs', seed=4):
            entry = json.loads(formatter.format(_record()))
        assert entry['algorithm'] == 'bfs'
        assert entry['seed'] == 4
        assert 'algorithm' not in json.loads(formatter.format(_record()))


class TestRunFieldsFormatter:

    def test_plain_line_without_fields(self):
        line = RunFieldsFormatter().format(_record())
        assert line.endswith('pulsesync.test: hello')

    def test_run_fields_come_first(self):
        with LogContext(seed=3, graph='grid:16:1', algorithm='bfs'):
            line = RunFieldsFormatter().format(_record(iteration=2, adversary='max-delay'))
        assert line.endswith('[algorithm=bfs graph=grid:16:1 adversary=max-delay seed=3 iteration=2]')


class TestLogContext:

    def teardown_method(self):
        clear_context()

    def test_nesting_restores_outer_fields(self):
        with LogContext(graph='path:8:1'):
            with LogContext(seed=2) as ctx:
                ctx.add(iteration=1)
                assert get_context() == {'graph': 'path:8:1', 'seed': 2, 'iteration': 1}
            assert get_context() == {'graph': 'path:8:1'}
        assert get_context() == {}

    def test_none_values_are_dropped(self):
        with LogContext(graph=None, seed=1):
            assert get_context() == {'seed': 1}

    def test_set_and_clear(self):
        set_context(run='a')
        assert get_context() == {'run': 'a'}
        clear_context()
        assert get_context() == {}


class TestStructuredLogger:

    def test_kwargs_become_record_attributes(self, caplog):
        logger = get_pulsesync_logger('unit')
        with caplog.at_level(logging.INFO, logger='pulsesync.unit'):
            logger.info("iteration finished", iteration=2, truncated=False, skipped=None)
        record = caplog.records[-1]
        assert record.name == 'pulsesync.unit'
        assert record.iteration == 2
        assert record.truncated is False
        assert not hasattr(record, 'skipped')

    def test_disabled_level_is_skipped(self, caplog):
        logger = get_pulsesync_logger('unit')
        with caplog.at_level(logging.WARNING, logger='pulsesync.unit'):
            logger.debug("noise", x=1)
        assert not caplog.records

    def test_timed_logs_success_and_failure(self, caplog):
        logger = get_pulsesync_logger('unit')

        @timed(logger, 'double')
        def double(x):
            if x < 0:
                raise ValueError("negative")
            return 2 * x

        with caplog.at_level(logging.INFO, logger='pulsesync.unit'):
            assert double(3) == 6
            with pytest.raises(ValueError):
                double(-1)
        ok, failed = caplog.records[-2:]
        assert ok.status == 'success'
        assert failed.status == 'error'
        assert failed.error == 'negative'

    def test_timed_reports_run_totals(self, caplog):
        logger = get_pulsesync_logger('unit')

        class Run:
            metrics = RunMetrics(messages_total=40, normalized_time=float('inf'))

        @timed(logger, 'run')
        def run():
            return Run()

        with caplog.at_level(logging.INFO, logger='pulsesync.unit'):
            run()
        record = caplog.records[-1]
        assert record.messages == 40
        assert record.normalized_time == 'inf'


class TestEventBus:

    def test_listeners_in_registration_order(self):
        bus = EventBus()
        seen = []
        bus.add_listener(lambda e, d: seen.append(('first', e)))
        bus.add_listener(lambda e, d: seen.append(('second', e)))
        bus.publish('go-ahead', {'node': 1})
        assert seen == [('first', 'go-ahead'), ('second', 'go-ahead')]

    def test_recorder_filters_by_name(self):
        bus = EventBus()
        recorder = EventRecorder('deliver')
        bus.add_listener(recorder)
        bus.publish('deliver', {'node': 3})
        bus.publish('admit', {'node': 3})
        assert recorder.of('deliver') == [{'node': 3}]
        assert recorder.of('admit') == []

    def test_remove_listener(self):
        bus = EventBus()
        recorder = EventRecorder()
        bus.add_listener(recorder)
        bus.remove_listener(recorder)
        bus.remove_listener(recorder)
        bus.publish('deliver')
        assert not bus.has_listeners
        assert recorder.events == []
