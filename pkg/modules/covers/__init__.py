"""
Covers module for PulseSync
Cluster trees, sparse covers, network decompositions and their verifier
"""

from .cluster import ClusterTree, SparseCover, LayeredCover, NetworkDecomposition, read_cover, write_cover
from .construction import build_cover_sync, build_layered_cover
from .decomposition import decompose
from .verify import verify_cover, verify_layered

__all__ = [
    'ClusterTree',
    'SparseCover',
    'LayeredCover',
    'NetworkDecomposition',
    'read_cover',
    'write_cover',
    'build_cover_sync',
    'build_layered_cover',
    'decompose',
    'verify_cover',
    'verify_layered'
]
