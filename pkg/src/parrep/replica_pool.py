"""
Worker pool advancing replicas through polling windows
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from src.chain.kernel import ChainKernel
from src.utils.config import VECTORIZE_THRESHOLD

logger = logging.getLogger(__name__)


class ReplicaPool:
    """
    Advance N replicas by a block of steps, replicas split into contiguous slices

    Uniforms arrive pre-drawn from each replica's stream, so paths do not
    depend on the number of workers. One `advance` call is one barrier.
    """

    def __init__(self, kernel: ChainKernel, workers: int = 1):
        """
        Initialize pool

        Args:
            kernel: Immutable transition kernel shared by all workers
            workers: Number of worker threads (1 runs inline)
        """
        self.kernel = kernel
        self.workers = max(1, int(workers))
        self._executor: Optional[ThreadPoolExecutor] = None
        if self.workers > 1:
            self._executor = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix='replica')
        logger.debug("Replica pool with %d worker(s)", self.workers)

    def _advance_slice(self, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        n, length = uniforms.shape
        if n < VECTORIZE_THRESHOLD:
            return np.stack([self.kernel.walk(x, u) for x, u in zip(states, uniforms)])

        paths = np.empty((n, length), dtype=np.int64)
        current = states
        for j in range(length):
            current = self.kernel.step(current, uniforms[:, j])
            paths[:, j] = current
        return paths

    def _slices(self, n: int) -> List[slice]:
        bounds = np.linspace(0, n, min(self.workers, n) + 1).astype(int)
        return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]

    def advance(self, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """
        Evolve every replica through its block of uniforms

        Args:
            states: Current replica states, shape (N,)
            uniforms: Row i feeds replica i, shape (N, L)

        Returns:
            Paths X_1..X_L per replica, shape (N, L)
        """
        states = np.asarray(states, dtype=np.int64)
        if self._executor is None or len(states) < 2:
            return self._advance_slice(states, uniforms)

        slices = self._slices(len(states))
        parts = self._executor.map(lambda s: self._advance_slice(states[s], uniforms[s]), slices)
        return np.concatenate(list(parts))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> 'ReplicaPool':
        return self

    def __exit__(self, *exc):
        self.close()
