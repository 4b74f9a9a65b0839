"""
Applications module for PulseSync
Synchronous programs; the drivers are in apps.bfs_tree, apps.leader and apps.mst
"""

from .programs import FloodBFS, MinIdFlood, BoruvkaMST, flood_bfs_factory, min_id_factory, boruvka_factory

__all__ = [
    'FloodBFS',
    'MinIdFlood',
    'BoruvkaMST',
    'flood_bfs_factory',
    'min_id_factory',
    'boruvka_factory'
]
