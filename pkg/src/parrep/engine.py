"""
ParRep driver: decorrelation, dephasing and parallel steps

Simulated time T_sim advances by the exact serial chain during decorrelation
and by the accelerated exit time tau_acc after each parallel step. Wall clock
charges 1 per decorrelation step, T_phase(S) per dephasing and M * T_poll per
parallel step.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import ChainKernel
from src.chain.rng import ReplicaStreams, RngStream
from src.metastability.collection import NO_SET, MetastableCollection
from src.parrep.accumulators import Accumulators, EventTrace, ExitEvent, TraceRecord
from src.parrep.replica_pool import ReplicaPool
from src.qsd.dephasing import DephasingOutcome, dephase_exact, dephase_fleming_viot, dephase_rejection
from src.qsd.solver import ExactQSDSampler
from src.utils.config import (
    DEFAULT_N_REPLICAS,
    DEFAULT_REJECTION_MAX_RESTARTS,
    DEFAULT_STOP_T_SIM,
    DEFAULT_T_POLL,
    DEFAULT_WORKERS,
)
from src.utils.errors import (
    ConfigurationError,
    DecorrelationTimeout,
    PreconditionError,
    UndefinedRatioError,
)

logger = logging.getLogger(__name__)

Observable = Callable[[np.ndarray], np.ndarray]

DEPHASING_MODES = ('rejection', 'fleming_viot', 'exact')

# Serial chunk sizes for the decorrelation walk
DECORRELATION_CHUNK_MIN = 256
DECORRELATION_CHUNK_MAX = 65_536

# Upper bound on steps per replica simulated in one pool call
WINDOW_BATCH_STEPS = 1024


class TabulatedObservable:
    """Observable given by a per-state value table"""

    def __init__(self, values: np.ndarray, name: str = 'f'):
        self.values = np.asarray(values, dtype=np.float64)
        self.name = name

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return self.values[states]


def constant_observable(value: float) -> Observable:
    """f(x) = value everywhere"""
    return lambda states: np.full(np.shape(states), float(value))


def _observe(observables: Mapping[str, Observable], states: np.ndarray) -> Dict[str, float]:
    """Sum of each observable over a block of states"""
    flat = np.asarray(states, dtype=np.int64).ravel()
    if len(flat) == 0:
        return {name: 0.0 for name in observables}
    return {name: float(np.sum(f(flat))) for name, f in observables.items()}


@dataclass
class ParRepConfig:
    """Run parameters"""

    n: int = DEFAULT_N_REPLICAS
    t_poll: int = DEFAULT_T_POLL
    dephasing_mode: str = 'fleming_viot'
    stop_t_sim: int = DEFAULT_STOP_T_SIM
    observables: Dict[str, Observable] = field(default_factory=lambda: {'one': constant_observable(1.0)})
    idealized_decorrelation: bool = False
    workers: int = DEFAULT_WORKERS
    trace: bool = False
    max_decorrelation_steps: Optional[int] = None
    rejection_max_restarts: int = DEFAULT_REJECTION_MAX_RESTARTS

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"Replica count N must be >= 1, got {self.n}")
        if self.t_poll < 1:
            raise ConfigurationError(f"T_poll must be >= 1, got {self.t_poll}")
        if self.stop_t_sim < 1:
            raise ConfigurationError(f"stop_T_sim must be >= 1, got {self.stop_t_sim}")
        if self.dephasing_mode not in DEPHASING_MODES:
            raise ConfigurationError(
                f"Unknown dephasing mode '{self.dephasing_mode}' (expected one of {DEPHASING_MODES})"
            )
        if not self.observables:
            raise ConfigurationError("At least one observable is required")


@dataclass
class DecorrelationState:
    """Run length of the current set visit, carried between decorrelation chunks"""

    label: int
    length: int


@dataclass
class ParRepResult:
    """Estimates f_sim / T_sim per observable with the final accumulators"""

    estimates: Dict[str, float]
    accumulators: Accumulators
    trace: Optional[EventTrace] = None


def speedup(acc: Accumulators) -> float:
    """T_sim divided by wall-clock time"""
    if acc.wall_clock <= 0:
        raise UndefinedRatioError("Speedup is undefined for zero wall-clock time")
    return acc.t_sim / acc.wall_clock


def _first_settled(
    labels: np.ndarray,
    carry: DecorrelationState,
    t_corr_table: np.ndarray,
    include_carry: bool
) -> Tuple[Optional[int], DecorrelationState]:
    """
    First position whose trailing run in one set reaches T_corr of that set

    Args:
        labels: Set positions of the next chunk of states
        carry: Run at the state preceding the chunk
        t_corr_table: T_corr by set position; last entry (NO_SET) unreachable
        include_carry: Also test the carried state itself

    Returns:
        (index into the chunk, or -1 for the carried state, or None; new carry)
    """
    seq = np.concatenate([[carry.label], labels])
    idx = np.arange(len(seq))
    starts = np.ones(len(seq), dtype=bool)
    starts[1:] = seq[1:] != seq[:-1]
    run = idx - np.maximum.accumulate(np.where(starts, idx, 0)) + 1
    continued = np.maximum.accumulate(starts[1:]) == 0
    run[1:][continued] += carry.length - 1
    run[0] = carry.length

    settled = (seq != NO_SET) & (run >= t_corr_table[seq])
    if not include_carry:
        settled[0] = False
    hits = np.flatnonzero(settled)
    new_carry = DecorrelationState(label=int(seq[-1]), length=int(run[-1]))
    if len(hits):
        return int(hits[0]) - 1, new_carry
    return None, new_carry


def decorrelation_step(
    kernel: ChainKernel,
    coll: MetastableCollection,
    x0: int,
    acc: Accumulators,
    rng: RngStream,
    observables: Mapping[str, Observable],
    limit: Optional[int] = None,
    max_steps: Optional[int] = None
) -> Tuple[int, int, Optional[str]]:
    """
    Evolve the exact chain until it has spent T_corr(S) consecutive states in some S

    sigma is the first n >= T_sim + T_corr(S) - 1 with X_{n-T_corr+1..n} in S; the
    window may include X_{T_sim}. f_sim gains f(X_{T_sim+1..sigma}), T_sim becomes
    sigma and wall clock grows by sigma - T_sim.

    Args:
        kernel: Transition kernel
        coll: Metastable collection
        x0: Current state X_{T_sim}
        acc: Accumulators (updated in place)
        rng: Serial chain stream
        observables: Named observables
        limit: Stop early once T_sim exceeds this value (run stop condition)
        max_steps: Optional step cap

    Returns:
        (sigma, X_sigma, set id), set id None when stopped by `limit`

    Raises:
        DecorrelationTimeout: Step cap reached
    """
    t_corr_table = np.append([coll.t_corr[s] for s in coll.set_ids], np.iinfo(np.int64).max)
    start_label = int(coll.labels(np.array([x0]))[0])
    carry = DecorrelationState(label=start_label, length=1 if start_label != NO_SET else 0)

    t_start = acc.t_sim
    x = int(x0)
    steps = 0
    chunk = DECORRELATION_CHUNK_MIN
    settled_set: Optional[str] = None
    first = True

    while True:
        take = chunk
        if limit is not None:
            take = min(take, limit + 1 - acc.t_sim)
        if max_steps is not None:
            take = min(take, max_steps - steps)
        if take <= 0:
            if limit is not None and acc.t_sim > limit:
                break
            raise DecorrelationTimeout(f"No metastable set reached after {steps} decorrelation steps")

        path = kernel.walk(x, rng.uniforms(take))
        labels = coll.labels(path)
        hit, carry = _first_settled(labels, carry, t_corr_table, include_carry=first)
        first = False

        used = take if hit is None else hit + 1
        acc.add_f(_observe(observables, path[:used]))
        acc.t_sim += used
        steps += used
        if used:
            x = int(path[used - 1])

        if hit is not None:
            settled_set = coll.set_ids[int(labels[hit]) if hit >= 0 else start_label]
            break
        chunk = min(chunk * 2, DECORRELATION_CHUNK_MAX)

    acc.wall_clock += acc.t_sim - t_start
    acc.n_decorr_steps += 1
    logger.debug("Decorrelation: %d steps, settled in %s", acc.t_sim - t_start, settled_set)
    return acc.t_sim, x, settled_set


def parallel_step(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    samples: np.ndarray,
    t_poll: int,
    observables: Mapping[str, Observable],
    streams: ReplicaStreams,
    pool: Optional[ReplicaPool] = None
) -> ExitEvent:
    """
    Run N replicas from QSD samples in polling windows until one exits

    K is the smallest replica index exiting in the first window with an exit,
    tau^K its first exit time in that window. Replicas 1..K-1 contribute the
    whole window, replica K contributes up to tau^K, and
    tau_acc = N * T_poll * (M - 1) + (K - 1) * T_poll + (tau^K - (M - 1) * T_poll).

    Args:
        kernel: Transition kernel
        coll: Metastable collection
        set_id: Set the replicas start in
        samples: N dephased states in S
        t_poll: Polling period
        observables: Named observables
        streams: One stream per replica ('parallel' context)
        pool: Replica pool (inline pool if None)

    Returns:
        ExitEvent
    """
    samples = np.asarray(samples, dtype=np.int64)
    if len(samples) == 0:
        raise PreconditionError("Parallel step needs at least one replica sample")
    position = coll.position(set_id)
    if np.any(coll.labels(samples) != position):
        raise PreconditionError(f"Parallel step samples must lie in '{set_id}'")
    if len(streams) != len(samples):
        raise PreconditionError(f"Got {len(streams)} streams for {len(samples)} replicas")

    pool = pool if pool is not None else ReplicaPool(kernel)
    n = len(samples)
    states = samples
    f_contrib = {name: 0.0 for name in observables}
    tau_acc = 0
    loops = 0
    batch = 1
    max_batch = max(1, WINDOW_BATCH_STEPS // t_poll)

    while True:
        paths = pool.advance(states, streams.take(batch * t_poll))
        outside = (coll.labels(paths) != position).reshape(n, batch, t_poll)
        window_exits = outside.any(axis=2)
        exiting_windows = np.flatnonzero(window_exits.any(axis=0))

        if len(exiting_windows) == 0:
            for name, value in _observe(observables, paths).items():
                f_contrib[name] += value
            tau_acc += n * batch * t_poll
            loops += batch
            states = paths[:, -1]
            batch = min(batch * 2, max_batch)
            continue

        w = int(exiting_windows[0])
        replica = int(np.flatnonzero(window_exits[:, w])[0])
        local = int(np.flatnonzero(outside[replica, w])[0]) + 1
        window = paths[:, w * t_poll:(w + 1) * t_poll]

        blocks = [paths[:, :w * t_poll], window[:replica], window[replica, :local]]
        for block in blocks:
            for name, value in _observe(observables, block).items():
                f_contrib[name] += value

        tau_acc += n * w * t_poll + replica * t_poll + local
        loops += w + 1
        return ExitEvent(
            tau_acc=tau_acc,
            x_acc=int(window[replica, local - 1]),
            f_contrib=f_contrib,
            loops=loops,
            replica=replica,
        )


class ParRepEngine:
    """Runs Decorrelation -> Dephasing -> Parallel until T_sim exceeds stop_T_sim"""

    def __init__(self, kernel: ChainKernel, coll: MetastableCollection, config: ParRepConfig):
        """
        Initialize engine

        Args:
            kernel: Transition kernel
            coll: Metastable collection (validated by the caller for finite kernels)
            config: Run parameters
        """
        needs_exact = config.dephasing_mode == 'exact' or config.idealized_decorrelation
        if needs_exact and not kernel.is_finite:
            raise ConfigurationError("Exact dephasing and idealized decorrelation need a finite kernel")

        self.kernel = kernel
        self.coll = coll
        self.config = config
        self.sampler = ExactQSDSampler(kernel, coll) if needs_exact else None

    def _initial_state(self, xi: Union[int, FiniteDistribution], seed: int) -> int:
        if isinstance(xi, FiniteDistribution):
            return int(xi.sample(RngStream.create(seed, 'init'), 1)[0])
        self.kernel.check_state(int(xi))
        return int(xi)

    def _dephase(self, set_id: str, start: int, seed: int, epoch: int) -> DephasingOutcome:
        mode = self.config.dephasing_mode
        n = self.config.n
        t_phase = self.coll.t_phase[set_id]
        if mode == 'exact':
            rng = RngStream.create(seed, 'exact-qsd', epoch=epoch)
            return dephase_exact(self.kernel, self.coll, set_id, n, rng, sampler=self.sampler)
        if mode == 'fleming_viot' and n >= 2:
            return dephase_fleming_viot(
                self.kernel, self.coll, set_id, n, t_phase, start, seed, epoch=epoch,
                max_restarts=self.config.rejection_max_restarts,
            )
        return dephase_rejection(
            self.kernel, self.coll, set_id, n, t_phase, start, seed, epoch=epoch,
            max_restarts=self.config.rejection_max_restarts,
        )

    def run(self, xi: Union[int, FiniteDistribution], seed: int) -> ParRepResult:
        """
        Execute one ParRep run

        Args:
            xi: Initial state index or initial distribution
            seed: Run seed; every stream of the run derives from it

        Returns:
            ParRepResult
        """
        config = self.config
        observables = config.observables
        acc = Accumulators(f_sim={name: 0.0 for name in observables})
        trace = EventTrace() if config.trace else None
        chain_rng = RngStream.create(seed, 'chain')
        x = self._initial_state(xi, seed)

        logger.info(
            "ParRep run: kernel=%s N=%d T_poll=%d mode=%s stop_T_sim=%d",
            self.kernel.name, config.n, config.t_poll, config.dephasing_mode, config.stop_t_sim,
        )

        with ReplicaPool(self.kernel, workers=config.workers) as pool:
            while acc.t_sim <= config.stop_t_sim:
                t_before, f_before = acc.t_sim, dict(acc.f_sim)
                _, x, set_id = decorrelation_step(
                    self.kernel, self.coll, x, acc, chain_rng, observables,
                    limit=config.stop_t_sim, max_steps=config.max_decorrelation_steps,
                )
                if set_id is not None and config.idealized_decorrelation and acc.t_sim > t_before:
                    x = self._idealize(x, set_id, acc, seed, observables)
                if trace is not None:
                    trace.append(TraceRecord(
                        phase='decorrelation',
                        t_sim_increment=acc.t_sim - t_before,
                        wall_increment=acc.t_sim - t_before,
                        set_id=set_id,
                        contribution={k: acc.f_sim[k] - f_before[k] for k in acc.f_sim},
                    ))
                if set_id is None or acc.t_sim > config.stop_t_sim:
                    break

                outcome = self._dephase(set_id, x, seed, epoch=acc.n_dephasings)
                t_phase = self.coll.t_phase[set_id]
                acc.wall_clock += t_phase
                acc.n_dephasings += 1
                acc.dephasing_work += outcome.work
                if trace is not None:
                    trace.append(TraceRecord(
                        phase='dephasing', t_sim_increment=0, wall_increment=t_phase,
                        set_id=set_id, contribution={k: 0.0 for k in acc.f_sim}, work=outcome.work,
                    ))

                streams = ReplicaStreams(seed, 'parallel', acc.n_parallel_steps, config.n)
                event = parallel_step(
                    self.kernel, self.coll, set_id, outcome.samples, config.t_poll,
                    observables, streams, pool=pool,
                )
                acc.t_sim += event.tau_acc
                acc.wall_clock += event.loops * config.t_poll
                acc.add_f(event.f_contrib)
                acc.n_parallel_steps += 1
                acc.n_parallel_loops += event.loops
                x = event.x_acc
                if trace is not None:
                    trace.append(TraceRecord(
                        phase='parallel', t_sim_increment=event.tau_acc,
                        wall_increment=event.loops * config.t_poll, set_id=set_id,
                        contribution=dict(event.f_contrib), loops=event.loops,
                    ))
                logger.debug(
                    "Parallel step %d in %s: tau_acc=%d, M=%d, K=%d",
                    acc.n_parallel_steps, set_id, event.tau_acc, event.loops, event.replica + 1,
                )

        estimates = acc.estimates()
        logger.info(
            "ParRep done: T_sim=%d wall_clock=%d parallel steps=%d", acc.t_sim, acc.wall_clock, acc.n_parallel_steps,
        )
        return ParRepResult(estimates=estimates, accumulators=acc, trace=trace)

    def _idealize(
        self,
        x: int,
        set_id: str,
        acc: Accumulators,
        seed: int,
        observables: Mapping[str, Observable]
    ) -> int:
        """Replace X_sigma by an exact QSD draw before its f contribution counts"""
        rng = RngStream.create(seed, 'idealize', epoch=acc.n_decorr_steps)
        fresh = int(self.sampler.qsd(set_id).sample(rng, 1)[0])
        old = _observe(observables, np.array([x]))
        new = _observe(observables, np.array([fresh]))
        acc.add_f({name: new[name] - old[name] for name in observables})
        return fresh


def run(
    kernel: ChainKernel,
    coll: MetastableCollection,
    config: ParRepConfig,
    xi: Union[int, FiniteDistribution],
    seed: int
) -> ParRepResult:
    """Shorthand for ParRepEngine(kernel, coll, config).run(xi, seed)"""
    return ParRepEngine(kernel, coll, config).run(xi, seed)
