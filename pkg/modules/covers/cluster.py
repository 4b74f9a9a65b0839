"""
Cluster trees, sparse covers, layered covers and network decompositions.

A ClusterTree spans its member nodes (terminals), possibly through relay
nodes that are not members. Text serialization, one cluster per block:

    cover <radius> <cluster-count>
    cluster <cid> <root> <radius>
    members <v> <v> ...
    parents <v>:<parent> ... (root has parent -)
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from ..core.errors import CoverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterTree:
    cid: int
    root: int
    parent: Mapping[int, Optional[int]]
    members: FrozenSet[int]
    radius: int = 0

    @cached_property
    def nodes(self) -> FrozenSet[int]:
        return frozenset(self.parent)

    @cached_property
    def children(self) -> Dict[int, Tuple[int, ...]]:
        kids: Dict[int, List[int]] = {v: [] for v in self.parent}
        for v, p in self.parent.items():
            if p is not None:
                kids[p].append(v)
        return {v: tuple(sorted(c)) for v, c in kids.items()}

    @cached_property
    def depth_of(self) -> Dict[int, int]:
        depth = {self.root: 0}
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for c in self.children.get(u, ()):
                depth[c] = depth[u] + 1
                queue.append(c)
        return depth

    @property
    def depth(self) -> int:
        return max(self.depth_of.values(), default=0)

    def tree_edges(self) -> List[Tuple[int, int]]:
        return [(min(v, p), max(v, p)) for v, p in self.parent.items() if p is not None]

    def is_member(self, v: int) -> bool:
        return v in self.members

    def check_shape(self) -> None:
        """Raise CoverError unless the tree is rooted, acyclic and spans its members."""
        if self.parent.get(self.root, 'missing') is not None:
            raise CoverError(f"cluster {self.cid}: root {self.root} must have no parent")
        if len(self.depth_of) != len(self.parent):
            raise CoverError(f"cluster {self.cid}: tree is not connected to its root")
        missing = self.members - self.nodes
        if missing:
            raise CoverError(f"cluster {self.cid}: members {sorted(missing)[:5]} outside the tree")


@dataclass
class SparseCover:
    radius: int
    clusters: List[ClusterTree]
    home: Dict[int, int] = field(default_factory=dict)  # node -> cid of a cluster holding its whole ball

    @cached_property
    def by_id(self) -> Dict[int, ClusterTree]:
        return {c.cid: c for c in self.clusters}

    @cached_property
    def membership(self) -> Dict[int, Tuple[int, ...]]:
        """node -> cids of clusters the node is a member of."""
        out: Dict[int, List[int]] = {}
        for c in self.clusters:
            for v in c.members:
                out.setdefault(v, []).append(c.cid)
        return {v: tuple(sorted(cids)) for v, cids in out.items()}

    @cached_property
    def tree_membership(self) -> Dict[int, Tuple[int, ...]]:
        """node -> cids of cluster trees the node belongs to (member or relay)."""
        out: Dict[int, List[int]] = {}
        for c in self.clusters:
            for v in c.nodes:
                out.setdefault(v, []).append(c.cid)
        return {v: tuple(sorted(cids)) for v, cids in out.items()}

    def clusters_of(self, v: int) -> List[ClusterTree]:
        return [self.by_id[cid] for cid in self.membership.get(v, ())]

    def trees_at(self, v: int) -> List[ClusterTree]:
        return [self.by_id[cid] for cid in self.tree_membership.get(v, ())]

    def home_cluster(self, v: int) -> ClusterTree:
        cid = self.home.get(v)
        if cid is None:
            raise CoverError(f"node {v} has no home cluster in the {self.radius}-cover")
        return self.by_id[cid]

    @property
    def nodes(self) -> Set[int]:
        return set(self.membership)


@dataclass
class LayeredCover:
    """Sparse 2^j-covers indexed by j."""
    layers: Dict[int, SparseCover] = field(default_factory=dict)

    def layer(self, j: int) -> SparseCover:
        cover = self.layers.get(j)
        if cover is None:
            raise CoverError(f"missing cover layer {j} (radius {1 << j}); have {sorted(self.layers)}")
        return cover

    def has(self, j: int) -> bool:
        return j in self.layers

    def add(self, j: int, cover: SparseCover) -> None:
        self.layers[j] = cover

    @property
    def top(self) -> int:
        return max(self.layers, default=-1)

    def require(self, up_to: int) -> None:
        for j in range(up_to + 1):
            self.layer(j)


@dataclass
class NetworkDecomposition:
    separation: int
    colors: List[List[ClusterTree]]

    @cached_property
    def assignment(self) -> Dict[int, Tuple[int, int]]:
        """node -> (color, cid)."""
        out = {}
        for color, clusters in enumerate(self.colors):
            for c in clusters:
                for v in c.members:
                    out[v] = (color, c.cid)
        return out

    @property
    def clusters(self) -> List[ClusterTree]:
        return [c for clusters in self.colors for c in clusters]


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

def format_cover(cover: SparseCover) -> str:
    lines = [f"cover {cover.radius} {len(cover.clusters)}"]
    for c in cover.clusters:
        lines.append(f"cluster {c.cid} {c.root} {c.radius}")
        lines.append("members " + " ".join(str(v) for v in sorted(c.members)))
        lines.append("parents " + " ".join(
            f"{v}:{'-' if p is None else p}" for v, p in sorted(c.parent.items())))
    homes = " ".join(f"{v}:{cid}" for v, cid in sorted(cover.home.items()))
    lines.append(f"home {homes}")
    return "\n".join(lines) + "\n"


def parse_cover(text: str) -> SparseCover:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith('#')]
    if not lines or not lines[0].startswith('cover '):
        raise CoverError("cover text must start with 'cover <radius> <count>'")
    try:
        _, radius, count = lines[0].split()
        clusters: List[ClusterTree] = []
        home: Dict[int, int] = {}
        i = 1
        while i < len(lines):
            head = lines[i].split()
            if head[0] == 'home':
                for item in head[1:]:
                    v, cid = item.split(':')
                    home[int(v)] = int(cid)
                i += 1
                continue
            if head[0] != 'cluster' or i + 2 >= len(lines):
                raise CoverError(f"expected a cluster block at line {i + 1}")
            _, cid, root, c_radius = head
            members = frozenset(int(v) for v in lines[i + 1].split()[1:])
            parent: Dict[int, Optional[int]] = {}
            for item in lines[i + 2].split()[1:]:
                v, p = item.split(':')
                parent[int(v)] = None if p == '-' else int(p)
            clusters.append(ClusterTree(int(cid), int(root), parent, members, int(c_radius)))
            i += 3
    except (ValueError, IndexError) as e:
        raise CoverError(f"malformed cover text: {e}") from e
    if len(clusters) != int(count):
        raise CoverError(f"header announces {count} clusters, found {len(clusters)}")
    for c in clusters:
        c.check_shape()
    return SparseCover(int(radius), clusters, home)


def write_cover(cover: SparseCover, path: Path) -> None:
    Path(path).write_text(format_cover(cover), encoding='utf-8')


def read_cover(path: Path) -> SparseCover:
    return parse_cover(Path(path).read_text(encoding='utf-8'))


def singleton_cover(nodes: Iterable[int]) -> SparseCover:
    """The 0-cover: every node alone in its own cluster."""
    clusters = [ClusterTree(v, v, {v: None}, frozenset([v]), 0) for v in sorted(nodes)]
    return SparseCover(0, clusters, {v: v for v in sorted(nodes)})
