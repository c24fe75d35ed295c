"""
Dephasing samplers: N approximate (or exact) QSD samples inside a metastable set

All walkers start at the decorrelation endpoint. Walker i draws from the
stream ('dephase', replica=i, epoch) so the outcome is fixed by (seed, epoch)
whatever the order in which walkers are advanced.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.chain.kernel import ChainKernel
from src.chain.rng import ReplicaStreams, RngStream
from src.metastability.collection import MetastableCollection
from src.qsd.solver import ExactQSDSampler
from src.utils.config import DEFAULT_REJECTION_MAX_RESTARTS
from src.utils.errors import ExtinctionError, PreconditionError, RejectionBudgetError

logger = logging.getLogger(__name__)


@dataclass
class DephasingOutcome:
    """N samples inside S plus the chain steps spent producing them"""

    samples: np.ndarray
    work: int
    n_restarts: int = 0


def _check_start(coll: MetastableCollection, set_id: str, start: int) -> int:
    position = coll.position(set_id)
    if coll.labels(np.array([start]))[0] != position:
        raise PreconditionError(f"Dephasing start {start} is not in set '{set_id}'")
    return position


def dephase_rejection(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    n: int,
    t_phase: int,
    start: int,
    seed: int,
    epoch: int = 0,
    max_restarts: int = DEFAULT_REJECTION_MAX_RESTARTS
) -> DephasingOutcome:
    """
    Keep independent trajectories that stay in S for t_phase steps

    Every attempt of a walker consumes t_phase uniforms from its stream; an
    attempt that leaves S is discarded and the walker restarts at `start`.
    Work counts every simulated step, up to and including the exiting one.

    Args:
        kernel: Transition kernel
        coll: Metastable collection
        set_id: Set to dephase in
        n: Number of samples
        t_phase: Required survival time
        start: Common start state (inside S)
        seed: Run seed
        epoch: Dephasing counter of the calling run
        max_restarts: Total restart budget over all walkers

    Returns:
        DephasingOutcome

    Raises:
        RejectionBudgetError: Restart budget exhausted
    """
    position = _check_start(coll, set_id, start)
    if n < 1:
        raise PreconditionError(f"Need at least one sample, got n={n}")
    if t_phase == 0:
        return DephasingOutcome(samples=np.full(n, start, dtype=np.int64), work=0)

    streams = ReplicaStreams(seed, 'dephase', epoch, n)
    samples = np.full(n, start, dtype=np.int64)
    pending = np.arange(n)
    work = 0
    n_restarts = 0

    while len(pending):
        block = np.stack([streams.streams[i].uniforms(t_phase) for i in pending])
        states = np.full(len(pending), start, dtype=np.int64)
        alive = np.ones(len(pending), dtype=bool)
        steps = np.zeros(len(pending), dtype=np.int64)

        for j in range(t_phase):
            states = np.where(alive, kernel.step(states, block[:, j]), states)
            steps += alive
            alive &= coll.labels(states) == position
            if not alive.any():
                break

        work += int(steps.sum())
        samples[pending[alive]] = states[alive]
        pending = pending[~alive]
        n_restarts += len(pending)
        if n_restarts > max_restarts:
            raise RejectionBudgetError(
                f"Rejection dephasing in '{set_id}' exceeded {max_restarts} restarts "
                f"(T_phase={t_phase}); use Fleming-Viot dephasing instead"
            )

    logger.debug("Rejection dephasing in %s: work %d, %d restarts", set_id, work, n_restarts)
    return DephasingOutcome(samples=samples, work=work, n_restarts=n_restarts)


def dephase_fleming_viot(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    n: int,
    t_phase: int,
    start: int,
    seed: int,
    epoch: int = 0,
    restart_on_extinction: bool = True,
    max_restarts: int = DEFAULT_REJECTION_MAX_RESTARTS
) -> DephasingOutcome:
    """
    Fleming-Viot particle dephasing

    N walkers step together. After each step, walkers that left S are moved
    (in index order) onto the current position of a uniformly chosen walker
    that survived this step. On total extinction the walkers restart at
    `start` and the T_phase clock restarts.

    Args:
        kernel: Transition kernel
        coll: Metastable collection
        set_id: Set to dephase in
        n: Number of walkers (>= 2)
        t_phase: Number of steps
        start: Common start state (inside S)
        seed: Run seed
        epoch: Dephasing counter of the calling run
        restart_on_extinction: Restart instead of raising ExtinctionError
        max_restarts: Extinction restart budget

    Returns:
        DephasingOutcome with work = N * (steps simulated)
    """
    position = _check_start(coll, set_id, start)
    if n < 2:
        raise PreconditionError(f"Fleming-Viot dephasing needs N >= 2, got {n}")
    if t_phase == 0:
        return DephasingOutcome(samples=np.full(n, start, dtype=np.int64), work=0)

    streams = ReplicaStreams(seed, 'dephase', epoch, n)
    resample = RngStream.create(seed, 'resample', epoch=epoch)

    states = np.full(n, start, dtype=np.int64)
    block = streams.take(t_phase)
    work = 0
    n_restarts = 0
    j = 0

    while j < t_phase:
        states = kernel.step(states, block[:, j])
        work += n
        exited = coll.labels(states) != position

        if exited.all():
            if not restart_on_extinction:
                raise ExtinctionError(f"All {n} Fleming-Viot walkers left '{set_id}' at step {j + 1}")
            n_restarts += 1
            if n_restarts > max_restarts:
                raise ExtinctionError(f"Fleming-Viot dephasing in '{set_id}' went extinct {n_restarts} times")
            logger.warning("Fleming-Viot extinction in %s at step %d; restarting walkers", set_id, j + 1)
            states = np.full(n, start, dtype=np.int64)
            block = streams.take(t_phase)
            j = 0
            continue

        if exited.any():
            survivors = np.flatnonzero(~exited)
            picks = resample.integers(len(survivors), int(exited.sum()))
            states[exited] = states[survivors[picks]]
        j += 1

    logger.debug("Fleming-Viot dephasing in %s: work %d, %d extinctions", set_id, work, n_restarts)
    return DephasingOutcome(samples=states, work=work, n_restarts=n_restarts)


def dephase_exact(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    n: int,
    rng: RngStream,
    sampler: Optional[ExactQSDSampler] = None
) -> DephasingOutcome:
    """
    N iid draws from the exact QSD (finite chains only); work is zero

    Args:
        kernel: Finite kernel
        coll: Metastable collection
        set_id: Set to dephase in
        n: Number of samples
        rng: Stream supplying one uniform per sample
        sampler: Optional cache of solved QSDs
    """
    if sampler is None:
        sampler = ExactQSDSampler(kernel, coll)
    nu = sampler.qsd(set_id)
    return DephasingOutcome(samples=nu.sample(rng, n), work=0)
