"""
Command-line front door: gen, run, sweep, verify-cover.

Exit codes: 0 when every invariant holds, 1 when one fails (or a run
raises a simulation error), 2 on usage errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .. import __version__
from ..core.constants import ADVERSARY_KINDS, ALGORITHMS, COVER_MODES, GRAPH_FAMILIES, TERMINATION_APPROACHES
from ..core.errors import ConfigError, CoverError, GraphError, SimulationError
from ..core.graph import format_edge_list, generate, parse_graph_spec, read_edge_list, write_edge_list
from ..core.metrics import get_metrics_collector
from ..core.settings import SettingsManager
from ..covers.cluster import read_cover
from ..covers.construction import build_cover_sync
from ..covers.verify import verify_cover
from .config import PROGRAMS, SYNC_MODES, ExperimentConfig, parse_int_list
from .runner import run_experiment
from .sweep import run_sweep, write_rows

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def _add_graph_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--graph', default='path:16:1',
                        help=f"family:n:seed[:weighted], family one of {', '.join(GRAPH_FAMILIES)}")
    parser.add_argument('--edges', type=Path, help='Read the graph from an edge-list file instead')


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--alg', default='bfs', choices=ALGORITHMS)
    parser.add_argument('--adversary', default=None,
                        help=f"kind[:seed], kind one of {', '.join(ADVERSARY_KINDS)}")
    parser.add_argument('--seed', type=int, default=0, help='Recorded with the run for replay')
    parser.add_argument('--termination', default='approach2', choices=TERMINATION_APPROACHES)
    parser.add_argument('--source', default='0', help='Source node, or comma-separated sources for multi-bfs')
    parser.add_argument('--t', type=int, default=None, help='Threshold exponent for fixed-t termination')
    parser.add_argument('--cover-mode', default=None, choices=COVER_MODES)
    parser.add_argument('--mode', default='unknown-T', choices=SYNC_MODES, help='Synchronizer mode')
    parser.add_argument('--program', default='flood', choices=PROGRAMS,
                        help='Synchronous program for sync-generic and alpha-baseline')
    parser.add_argument('--baseline', default=None, choices=['alpha'])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pulsesync', description='Pulse-gated synchronizer simulator')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--settings', type=Path, help='JSON settings file')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default=None)
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', help='Generate a graph and write its edge list')
    gen.add_argument('--graph', required=True, help='family:n:seed[:weighted]')
    gen.add_argument('--out', type=Path, help='Output file (default: stdout)')

    run = sub.add_parser('run', help='Run one experiment and write its JSON result')
    _add_graph_args(run)
    _add_run_args(run)
    run.add_argument('--out', type=Path, help='JSON result file (default: stdout)')
    run.add_argument('--trace', type=Path, help='Write the event trace here')
    run.add_argument('--metrics-out', type=Path, help='Write Prometheus metrics text here')

    sweep = sub.add_parser('sweep', help='Run a family over sizes and seeds, write CSV')
    sweep.add_argument('--family', required=True, choices=GRAPH_FAMILIES)
    sweep.add_argument('--n', required=True, help='Comma-separated sizes')
    sweep.add_argument('--seeds', default='1', help='Comma-separated seeds')
    sweep.add_argument('--workers', type=int, default=None)
    _add_run_args(sweep)
    sweep.add_argument('--out', type=Path, help='CSV file (default: stdout)')

    verify = sub.add_parser('verify-cover', help='Verify a sparse cover read from a file or built for a radius')
    _add_graph_args(verify)
    verify.add_argument('--cover', type=Path, help='Cover file to read')
    verify.add_argument('--radius', type=int, default=2, help='Radius d of the cover to build')
    verify.add_argument('--out', type=Path, help='JSON report file (default: stdout)')
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding='utf-8')


def _config_from_args(args: argparse.Namespace, settings: dict, graph: Optional[str] = None) -> ExperimentConfig:
    return ExperimentConfig.from_settings(
        settings,
        graph=graph or getattr(args, 'graph', None),
        edges_path=str(args.edges) if getattr(args, 'edges', None) else None,
        algorithm=args.alg,
        adversary=args.adversary,
        seed=args.seed,
        termination=args.termination,
        sources=list(parse_int_list(args.source, 'sources')),
        threshold=args.t,
        cover_mode=args.cover_mode,
        sync_mode=args.mode,
        program=args.program,
        baseline=args.baseline,
    )


def cmd_gen(args: argparse.Namespace) -> int:
    g = generate(parse_graph_spec(args.graph))
    if args.out is None:
        sys.stdout.write(format_edge_list(g))
    else:
        write_edge_list(g, args.out)
    return EXIT_OK


def cmd_run(args: argparse.Namespace, settings: dict) -> int:
    config = _config_from_args(args, settings)
    trace = args.trace is not None or bool(settings.get('trace'))
    result = run_experiment(config, trace=trace)
    _emit(json.dumps(result.to_dict(), indent=2, sort_keys=True) + '\n', args.out)
    if args.trace is not None:
        lines = result.metrics.trace or []
        _emit(''.join(line + '\n' for line in lines), args.trace)
    if args.metrics_out is not None:
        _emit(get_metrics_collector().generate_metrics_text(), args.metrics_out)
    if not result.passed:
        print(f"FAILED: {', '.join(result.report.failures())}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: dict) -> int:
    ns = parse_int_list(args.n, 'sizes')
    seeds = parse_int_list(args.seeds, 'seeds')
    base = _config_from_args(args, settings, graph=f"{args.family}:{ns[0]}:{seeds[0]}")
    workers = args.workers if args.workers is not None else int(settings.get('sweep_workers', 1))
    if workers < 1:
        raise ConfigError("--workers must be at least 1")
    result = run_sweep(base, args.family, ns, seeds, workers=workers, out=args.out)
    if args.out is None:
        write_rows(result.rows, sys.stdout)
    if not result.passed:
        print(f"FAILED: {', '.join(result.failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_verify_cover(args: argparse.Namespace) -> int:
    g = read_edge_list(args.edges) if args.edges else generate(parse_graph_spec(args.graph))
    if args.cover is not None:
        cover = read_cover(args.cover)
    else:
        if args.radius < 1:
            raise ConfigError("--radius must be at least 1")
        cover = build_cover_sync(g, args.radius)
    report = verify_cover(g, cover)
    _emit(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n', args.out)
    return EXIT_OK if report.passed else EXIT_INVARIANT


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    if args.log_level:
        logging.getLogger().setLevel(getattr(logging, args.log_level))

    try:
        settings = SettingsManager(args.settings).load_settings()
        if args.command == 'gen':
            return cmd_gen(args)
        if args.command == 'run':
            return cmd_run(args, settings)
        if args.command == 'sweep':
            return cmd_sweep(args, settings)
        return cmd_verify_cover(args)
    except (ConfigError, GraphError, CoverError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"FAILED: {e}", file=sys.stderr)
        return EXIT_INVARIANT
