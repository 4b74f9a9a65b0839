"""
Parameter sweeps: one experiment per (n, seed), optionally in worker
processes, written as a CSV with a fixed header.
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from ..core.constants import SWEEP_CSV_FIELDS
from ..core.errors import ConfigError
from ..core.graph import diameter
from ..core.runtime import ACK, ALGORITHM
from ..core.structured_logging import get_pulsesync_logger, timed
from .config import ExperimentConfig
from .runner import run_experiment

logger = get_pulsesync_logger('sweep')


@dataclass
class SweepResult:
    rows: List[Dict[str, Any]]
    failed: List[str]

    @property
    def passed(self) -> bool:
        return not self.failed


def _format(value: Any) -> Any:
    return f"{value:.6f}" if isinstance(value, float) else value


def _sweep_point(config: ExperimentConfig) -> Dict[str, Any]:
    """Run one sweep point; top level so worker processes can unpickle it."""
    result = run_experiment(config)
    metrics = result.metrics
    g = config.load_graph()
    categories = ';'.join(f"{k}={v}" for k, v in sorted(metrics.messages_by_category.items()))
    row = {
        'n': g.n,
        'm': g.m,
        'D': diameter(g),
        'seed': config.seed,
        'algorithm': config.algorithm,
        'adversary': config.adversary,
        'messages_total': metrics.messages_total,
        'messages_algorithm': metrics.messages_by_kind.get(ALGORITHM, 0),
        'messages_ack': metrics.messages_by_kind.get(ACK, 0),
        'messages_by_category': categories,
        'normalized_time': float(metrics.normalized_time),
        'time_to_all_outputs': float(metrics.time_to_all_outputs),
        'overhead_ratio': metrics.messages_total / g.m if g.m else 0.0,
        'alpha_messages_total': metrics.extra.get('alpha_messages_total', ''),
        'alpha_overhead_ratio': '',
    }
    if 'alpha_messages_total' in metrics.extra and g.m:
        row['alpha_overhead_ratio'] = metrics.extra['alpha_messages_total'] / g.m
    row['_passed'] = result.passed
    return row


def sweep_configs(base: ExperimentConfig, family: str, ns: Sequence[int], seeds: Sequence[int]) -> List[ExperimentConfig]:
    if not ns:
        raise ConfigError("sweep needs at least one graph size")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    weighted = ':weighted' if base.algorithm == 'mst' or base.program == 'boruvka' else ''
    configs = [replace(base, graph=f"{family}:{n}:{seed}{weighted}", seed=seed, edges_path=None)
               for n in sorted(set(ns)) for seed in sorted(set(seeds))]
    for config in configs:
        config.validate()
    return configs


@timed(logger, 'sweep')
def run_sweep(base: ExperimentConfig, family: str, ns: Sequence[int], seeds: Sequence[int],
              workers: int = 1, out: Optional[Path] = None) -> SweepResult:
    """Run every (n, seed) point; rows come back sorted by (n, seed) whatever the worker count."""
    configs = sweep_configs(base, family, ns, seeds)
    logger.info("sweep started", runs=len(configs), algorithm=base.algorithm, family=family, workers=workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, configs))
    else:
        rows = [_sweep_point(config) for config in configs]
    rows.sort(key=lambda r: (r['n'], r['seed']))

    failed = [f"n={r['n']} seed={r['seed']}" for r in rows if not r.pop('_passed')]
    if failed:
        logger.warning("sweep points failed their invariant checks", failed=failed)
    if out is not None:
        write_csv(rows, out)
    return SweepResult(rows, failed)


def write_rows(rows: List[Dict[str, Any]], stream: TextIO) -> None:
    writer = csv.DictWriter(stream, fieldnames=SWEEP_CSV_FIELDS, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format(row[k]) for k in SWEEP_CSV_FIELDS})


def write_csv(rows: List[Dict[str, Any]], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        write_rows(rows, f)
