"""
Protocols module for PulseSync
Pulse arithmetic, cluster aggregation, registration and the pulse-gated engine.
The cover-driven drivers live in protocols.complete and protocols.synchronizer.
"""

from .pulses import level, prev, PulseSchedule
from .aggregation import TreeAggregator, run_cluster_aggregation, done_convergecast
from .registration import RegistrationInstance
from .engine import run_engine, SynchronizedRun
from .bfs import BfsResult, thresholded_bfs, thresholded_bfs_multi, staged_bfs
from .alpha import alpha_synchronize

__all__ = [
    'level',
    'prev',
    'PulseSchedule',
    'TreeAggregator',
    'run_cluster_aggregation',
    'done_convergecast',
    'RegistrationInstance',
    'run_engine',
    'SynchronizedRun',
    'BfsResult',
    'thresholded_bfs',
    'thresholded_bfs_multi',
    'staged_bfs',
    'alpha_synchronize'
]
