"""
Harness module for PulseSync
Experiment configuration, single runs, sweeps and the command line
"""

from .config import ExperimentConfig
from .runner import run_experiment, InvariantReport
from .cli import main

__all__ = [
    'ExperimentConfig',
    'run_experiment',
    'InvariantReport',
    'main'
]
