"""
The general synchronizer: run any event-driven PulseProgram asynchronously.

With a known bound T on the synchronous running time, one pulse-gated run
to horizon T suffices. Without it, runs to horizons 1, 2, 4, ... restart the
program from scratch, growing the layered cover between them, until a run
ends with no virtual node held back at the horizon. Cover growth stops by
itself once a layer has a cluster holding every node.
"""

from typing import Mapping, Optional, Union

from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT
from ..core.errors import ConfigError, SimulationError
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import RunMetrics
from ..core.structured_logging import get_pulsesync_logger
from ..core.sync_runtime import PulseFactory, PulseProgram, run_sync
from .alpha import alpha_synchronize
from .complete import CoverBootstrap
from .engine import SynchronizedRun, run_engine
from .pulses import max_layer_for

logger = get_pulsesync_logger('synchronizer')

SYNC_MODES = ('known-T', 'unknown-T', 'alpha')

MAX_DOUBLINGS = 24


def synchronize(g: NetworkGraph, programs: Union[PulseFactory, Mapping[int, PulseProgram]],
                mode: str = 'unknown-T', rounds: Optional[int] = None, shift: int = DEFAULT_RADIUS_SHIFT,
                cover_mode: str = 'sync', adversary: Optional[AdversarySpec] = None,
                event_cap: int = DEFAULT_EVENT_CAP, trace: bool = False, bus: Optional[EventBus] = None,
                check: bool = True) -> SynchronizedRun:
    """Simulate the synchronous execution of `programs` on the asynchronous runtime.

    `rounds` is T for known-T mode (measured by a synchronous run when
    omitted). With `check`, the delivered wrapped messages and the outputs
    are compared with run_sync and recorded as sync_equivalence.
    """
    if mode not in SYNC_MODES:
        raise ConfigError(f"unknown synchronizer mode {mode!r}; expected one of {', '.join(SYNC_MODES)}")
    if mode == 'alpha':
        run = alpha_synchronize(g, programs, rounds, adversary, event_cap, trace, bus)
        if check and run.equivalent is None and not isinstance(programs, Mapping):
            run.check_against(run_sync(g, programs))
        return run
    if isinstance(programs, Mapping) and (check or mode == 'unknown-T' or rounds is None):
        raise ValueError("synchronize needs a program factory to run the program more than once")

    oracle = run_sync(g, programs) if check or (mode == 'known-T' and rounds is None) else None
    covers = CoverBootstrap(g, set(range(g.n)), shift, cover_mode, adversary, event_cap, bus)
    metrics = RunMetrics()

    if mode == 'known-T':
        horizon = rounds if rounds is not None else oracle.rounds
        covers.ensure(max_layer_for(horizon, shift))
        result = run_engine(g, programs, covers.layered, horizon, shift, adversary, event_cap, trace, bus)
        metrics.absorb(result.metrics, take_outputs=True)
        iterations = 1
    else:
        iterations = 0
        while True:
            if iterations > MAX_DOUBLINGS:
                raise SimulationError(f"program still running after horizon {1 << MAX_DOUBLINGS}")
            horizon = 1 << iterations
            covers.ensure(max_layer_for(horizon, shift))
            result = run_engine(g, programs, covers.layered, horizon, shift, adversary, event_cap, trace, bus)
            metrics.absorb(result.metrics, take_outputs=True)
            iterations += 1
            logger.info("synchronizer iteration finished", iteration=iterations - 1, horizon=horizon,
                        truncated=result.truncated, messages=metrics.messages_total)
            if not result.truncated:
                break

    metrics.absorb(covers.metrics)
    metrics.iterations = iterations
    run = SynchronizedRun(metrics, list(result.record.messages), result.truncated, horizon)
    if oracle is not None and check:
        run.check_against(oracle)
    return run
