"""
Single experiment runs: dispatch to a driver, check its outputs against the
oracles, and write the JSON result.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..apps.bfs_tree import bfs_app, tree_violations
from ..apps.leader import leader_election
from ..apps.mst import mst
from ..apps.programs import INFINITY, boruvka_factory, flood_bfs_factory, min_id_factory
from ..core.errors import GraphError
from ..core.events import EventBus
from ..core.graph import NetworkGraph, bfs_oracle
from ..core.metrics import get_metrics_collector
from ..core.runtime import RunMetrics
from ..core.structured_logging import LogContext, get_pulsesync_logger
from ..core.sync_runtime import PulseFactory
from ..core.utils import jsonable
from ..covers.construction import build_layered_cover
from ..protocols.alpha import alpha_synchronize
from ..protocols.bfs import thresholded_bfs_multi
from ..protocols.synchronizer import synchronize
from .config import ExperimentConfig

logger = get_pulsesync_logger('runner')


@dataclass
class InvariantReport:
    """Named pass/fail checks of one run."""
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = '') -> None:
        self.checks.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self) -> List[str]:
        return [name for name, ok, _ in self.checks if not ok]

    def to_dict(self) -> Dict[str, Any]:
        return {name: {'passed': ok, 'detail': detail} for name, ok, detail in self.checks}


@dataclass
class RunResult:
    config: ExperimentConfig
    metrics: RunMetrics
    report: InvariantReport

    @property
    def passed(self) -> bool:
        return self.report.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.to_dict(),
            'metrics': self.metrics.to_dict(),
            'outputs': jsonable({str(v): out for v, out in sorted(self.metrics.outputs.items())}),
            'sync_equivalence': self.metrics.sync_equivalence,
            'invariant_report': self.report.to_dict(),
            'passed': self.passed,
        }

    def write(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')


def program_factory(config: ExperimentConfig, g: NetworkGraph) -> PulseFactory:
    if config.program == 'min-id':
        return min_id_factory()
    if config.program == 'boruvka':
        if not g.is_weighted:
            raise GraphError("the boruvka program needs a weighted graph (family:n:seed:weighted)")
        return boruvka_factory(g)
    return flood_bfs_factory({s: None for s in config.sources})


def _check_bfs(g: NetworkGraph, sources, outputs: Dict[int, tuple], report: InvariantReport,
               threshold: Optional[int] = None) -> None:
    expected, _ = bfs_oracle(g, sources)
    if threshold is not None:
        expected = {v: d if d <= threshold else INFINITY for v, d in expected.items()}
    wrong = sorted(v for v in range(g.n) if v not in outputs or outputs[v][0] != expected[v])
    report.add('bfs_exact', not wrong, f"wrong distance at {wrong[:10]}" if wrong else '')
    bad = tree_violations(g, {v: out[:2] for v, out in outputs.items()})
    report.add('bfs_tree', not bad, '; '.join(f"{v}: {why}" for v, why in sorted(bad.items())[:5]))


def _run_algorithm(config: ExperimentConfig, g: NetworkGraph, report: InvariantReport, trace: bool,
                   bus: Optional[EventBus]) -> RunMetrics:
    adversary = config.adversary_spec()
    common = dict(shift=config.radius_shift, adversary=adversary, event_cap=config.event_cap, bus=bus)
    sources = config.sources if config.algorithm == 'multi-bfs' else config.sources[:1]
    bad_sources = [s for s in sources if not 0 <= s < g.n]
    if bad_sources:
        raise GraphError(f"sources {bad_sources} are not nodes of a {g.n}-node graph")

    if config.algorithm in ('bfs', 'multi-bfs'):
        if config.termination == 'fixed-t':
            layered, modeled = build_layered_cover(g, config.threshold + config.radius_shift,
                                                   shift=config.radius_shift)
            result = thresholded_bfs_multi(g, sources, config.threshold, layered, trace=trace, **common)
            result.metrics.modeled.update(modeled)
            _check_bfs(g, sources, result.outputs, report, threshold=1 << config.threshold)
        else:
            result = bfs_app(g, sources, termination=config.termination, cover_mode=config.cover_mode,
                             trace=trace, **common)
            _check_bfs(g, sources, result.outputs, report)
        return result.metrics

    if config.algorithm == 'leader':
        result = leader_election(g, cover_mode=config.cover_mode, **common)
        expected = min(range(g.n))
        wrong = sorted(v for v in range(g.n) if result.outputs.get(v) != expected)
        report.add('leader_agreement', not wrong,
                   f"expected {expected}, wrong or missing at {wrong[:10]}" if wrong else '')
        return result.metrics

    if config.algorithm == 'mst':
        result = mst(g, mode=config.sync_mode, cover_mode=config.cover_mode, trace=trace, **common)
        report.add('mst_exact', result.exact, f"weight {result.weight}")
        return result.metrics

    factory = program_factory(config, g)
    if config.algorithm == 'alpha-baseline':
        run = alpha_synchronize(g, factory, adversary=adversary, event_cap=config.event_cap, trace=trace,
                                bus=bus)
    else:
        run = synchronize(g, factory, mode=config.sync_mode, cover_mode=config.cover_mode, trace=trace,
                          **common)
    report.add('sync_equivalence', bool(run.equivalent),
               f"{len(run.messages)} wrapped messages over {run.pulses} pulses")
    return run.metrics


def run_experiment(config: ExperimentConfig, trace: bool = False,
                   bus: Optional[EventBus] = None) -> RunResult:
    """Run one configured experiment and check its invariants."""
    config.validate()
    g = config.load_graph()
    report = InvariantReport()
    started = time.monotonic()
    collector = get_metrics_collector()
    with LogContext(algorithm=config.algorithm, graph=config.graph, adversary=config.adversary, seed=config.seed):
        try:
            metrics = _run_algorithm(config, g, report, trace, bus)
        except Exception:
            collector.record_failure(config.algorithm)
            raise

    if config.baseline == 'alpha' and config.algorithm != 'alpha-baseline':
        factory = program_factory(config, g) if config.algorithm == 'sync-generic' else \
            flood_bfs_factory({s: None for s in config.sources})
        alpha = alpha_synchronize(g, factory, adversary=config.adversary_spec(), event_cap=config.event_cap)
        metrics.extra['alpha_messages_total'] = alpha.metrics.messages_total
        metrics.extra['alpha_normalized_time'] = alpha.metrics.normalized_time

    collector.record_run(config.algorithm, metrics, time.monotonic() - started, report.passed)
    logger.info("run finished", algorithm=config.algorithm, graph=config.graph, messages=metrics.messages_total,
                normalized_time=metrics.normalized_time, passed=report.passed)
    if not report.passed:
        logger.warning("invariants failed", algorithm=config.algorithm, failed=report.failures())
    return RunResult(config, metrics, report)
