"""
Invariant checks for sparse covers and network decompositions.

verify_cover() never raises on a bad cover; it returns a report with one
entry per check and the measured constants, so the CLI can print and the
tests can assert on named failures.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Set, Union

from ..core.constants import COVER_CONSTANT_BOUNDS
from ..core.errors import CoverError
from ..core.graph import NetworkGraph
from ..core.utils import log2_at_least_one
from .cluster import LayeredCover, NetworkDecomposition, SparseCover
from .decomposition import labelled_bfs

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ''


@dataclass
class CoverReport:
    kind: str
    checks: List[CheckResult] = field(default_factory=list)
    measured: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add(self, name: str, passed: bool, detail: str = '') -> None:
        self.checks.append(CheckResult(name, passed, detail))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'passed': self.passed,
            'checks': [{'name': c.name, 'passed': c.passed, 'detail': c.detail} for c in self.checks],
            'measured': {k: round(v, 4) for k, v in sorted(self.measured.items())},
        }


def _bound_check(report: CoverReport, key: str, value: float) -> None:
    report.measured[key] = value
    bound = COVER_CONSTANT_BOUNDS[key]
    report.add(key, value <= bound, f"measured {value:.3f}, bound {bound}")


def _shape_checks(report: CoverReport, clusters, nodes: Set[int]) -> bool:
    ok = True
    for c in clusters:
        try:
            c.check_shape()
        except CoverError as e:
            report.add('tree-shape', False, str(e))
            ok = False
            break
        stray = c.nodes - nodes
        if stray:
            report.add('tree-shape', False, f"cluster {c.cid} uses nodes outside the graph: {sorted(stray)[:5]}")
            ok = False
            break
    if ok:
        report.add('tree-shape', True)
    return ok


def _edge_load(g: NetworkGraph, clusters) -> int:
    load: Counter = Counter()
    for c in clusters:
        for e in c.tree_edges():
            if not g.has_edge(*e):
                raise CoverError(f"cluster {c.cid} tree edge {e} is not a graph edge")
            load[e] += 1
    return max(load.values(), default=0)


def verify_sparse_cover(g: NetworkGraph, cover: SparseCover,
                        nodes: Optional[Iterable[int]] = None) -> CoverReport:
    node_set = set(range(g.n)) if nodes is None else set(nodes)
    within = None if nodes is None else node_set
    report = CoverReport('cover')
    log_n = log2_at_least_one(len(node_set))
    d = cover.radius
    if not _shape_checks(report, cover.clusters, set(range(g.n))):
        return report

    witness = None
    for v in sorted(node_set):
        ball = set(labelled_bfs(g, {v: v}, d, within))
        cid = cover.home.get(v)
        holders = [cover.by_id[cid]] if cid is not None else cover.clusters_of(v)
        if not any(ball <= c.members for c in holders):
            witness = v
            break
    report.add('coverage', witness is None,
               '' if witness is None else f"no cluster contains the {d}-ball of node {witness}")

    memberships = max((len(cids) for cids in cover.membership.values()), default=0)
    _bound_check(report, 'c_mem', memberships / log_n)
    depth = max((c.depth for c in cover.clusters), default=0)
    report.measured['max_depth'] = depth
    _bound_check(report, 'c_str', depth / (max(d, 1) * log_n ** 3))
    try:
        load = _edge_load(g, cover.clusters)
    except CoverError as e:
        report.add('c_tree', False, str(e))
    else:
        _bound_check(report, 'c_tree', load / log_n ** 4)
    logger.debug(f"{d}-cover verification: {'pass' if report.passed else 'FAIL'} {report.measured}")
    return report


def verify_decomposition(g: NetworkGraph, dec: NetworkDecomposition,
                         nodes: Optional[Iterable[int]] = None) -> CoverReport:
    node_set = set(range(g.n)) if nodes is None else set(nodes)
    within = None if nodes is None else node_set
    report = CoverReport('decomposition')
    log_n = log2_at_least_one(len(node_set))
    k = dec.separation
    if not _shape_checks(report, dec.clusters, set(range(g.n))):
        return report

    seen: Counter = Counter(v for c in dec.clusters for v in c.members)
    twice = sorted(v for v, count in seen.items() if count > 1)
    missing = sorted(node_set - set(seen))
    report.add('partition', not twice and not missing,
               f"in several clusters: {twice[:5]}, unclustered: {missing[:5]}" if twice or missing else '')

    violation = None
    for color, clusters in enumerate(dec.colors):
        owner = {v: c.cid for c in clusters for v in c.members}
        for c in clusters:
            reach = labelled_bfs(g, {v: c.cid for v in c.members}, k, within)
            hit = next((w for w in sorted(reach) if owner.get(w, c.cid) != c.cid), None)
            if hit is not None:
                violation = (color, c.cid, owner[hit], hit)
                break
        if violation:
            break
    report.add('separation', violation is None,
               '' if violation is None else
               f"color {violation[0]}: clusters {violation[1]} and {violation[2]} within {k} (node {violation[3]})")

    remaining = len(node_set)
    half_ok = True
    for color, clusters in enumerate(dec.colors):
        clustered = sum(len(c.members) for c in clusters)
        if clustered * 2 < remaining:
            half_ok = False
            report.add('half-per-color', False, f"color {color} clustered {clustered} of {remaining}")
            break
        remaining -= clustered
    if half_ok:
        report.add('half-per-color', True)

    _bound_check(report, 'c_color', len(dec.colors) / log_n)
    radius = max((c.depth for c in dec.clusters), default=0)
    report.measured['max_depth'] = radius
    _bound_check(report, 'c_rad', radius / (k * log_n ** 3))
    try:
        load = _edge_load(g, dec.clusters)
    except CoverError as e:
        report.add('c_tree', False, str(e))
    else:
        _bound_check(report, 'c_tree', load / log_n ** 4)
    return report


def verify_cover(g: NetworkGraph, cover: Union[SparseCover, NetworkDecomposition],
                 nodes: Optional[Iterable[int]] = None) -> CoverReport:
    """Check every invariant of a sparse cover or a network decomposition."""
    if isinstance(cover, NetworkDecomposition):
        return verify_decomposition(g, cover, nodes)
    return verify_sparse_cover(g, cover, nodes)


def verify_layered(g: NetworkGraph, layered: LayeredCover, up_to: int,
                   nodes: Optional[Iterable[int]] = None) -> None:
    """Raise CoverError unless layers 0..up_to exist and pass verification."""
    for j in range(up_to + 1):
        cover = layered.layer(j)
        if cover.radius < 1 << j:
            raise CoverError(f"layer {j} has radius {cover.radius}, needs {1 << j}")
        report = verify_sparse_cover(g, cover, nodes)
        if not report.passed:
            names = ', '.join(f"{c.name} ({c.detail})" for c in report.failures())
            raise CoverError(f"layer {j} failed verification: {names}")
