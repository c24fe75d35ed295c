"""
Transition kernels: sampleable Markov transition rules, with exact matrices for finite chains

States are integer codes. A kernel turns one uniform per walker into one
transition by inverting the row CDF, successors taken in ascending index order.
"""
from abc import ABC, abstractmethod
from bisect import bisect_right
from pathlib import Path
from typing import Any, Hashable, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from src.chain.distribution import FiniteDistribution
from src.chain.rng import RngStream
from src.utils.config import TOLERANCES
from src.utils.errors import ConfigurationError, DomainError, UnsupportedOperationError


class StateCodec(ABC):
    """Bijection between model states and state indices"""

    @abstractmethod
    def encode(self, state: Any) -> int:
        """Model state -> index"""

    @abstractmethod
    def decode(self, index: int) -> Hashable:
        """Index -> model state"""


class IdentityCodec(StateCodec):
    """States are their own indices"""

    def encode(self, state: Any) -> int:
        return int(state)

    def decode(self, index: int) -> int:
        return int(index)


class OffsetCodec(StateCodec):
    """States {offset, offset+1, ...} stored at indices {0, 1, ...}"""

    def __init__(self, offset: int):
        self.offset = int(offset)

    def encode(self, state: Any) -> int:
        return int(state) - self.offset

    def decode(self, index: int) -> int:
        return int(index) + self.offset


class ChainKernel(ABC):
    """A Markov transition rule driven by one uniform per step"""

    is_finite = False

    def __init__(self, name: str = 'kernel', codec: Optional[StateCodec] = None):
        self.name = name
        self.codec = codec if codec is not None else IdentityCodec()

    @abstractmethod
    def step(self, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """
        Advance every walker one step

        Args:
            states: Current state indices, shape (n,)
            uniforms: One uniform per walker, shape (n,)

        Returns:
            Successor state indices, shape (n,)
        """

    def walk(self, x0: int, uniforms: Sequence[float]) -> np.ndarray:
        """
        Serial trajectory X_1..X_k from X_0 = x0, one uniform per step
        """
        path = np.empty(len(uniforms), dtype=np.int64)
        current = np.array([x0], dtype=np.int64)
        for i, u in enumerate(uniforms):
            current = self.step(current, np.array([u]))
            path[i] = current[0]
        return path

    def check_state(self, x: int) -> None:
        """Raise DomainError if x is not a state of this kernel"""


class FiniteKernel(ChainKernel):
    """Finite chain backed by a sparse row-stochastic matrix"""

    is_finite = True

    def __init__(
        self,
        matrix: Union[sp.spmatrix, np.ndarray],
        name: str = 'finite',
        codec: Optional[StateCodec] = None
    ):
        """
        Initialize finite kernel

        Args:
            matrix: Row-stochastic transition matrix (dense or sparse)
            name: Model name used in logs and reports
            codec: State <-> index bijection (identity by default)
        """
        super().__init__(name=name, codec=codec)

        matrix = sp.csr_matrix(matrix, dtype=np.float64)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()

        if matrix.shape[0] != matrix.shape[1]:
            raise ConfigurationError(f"Transition matrix must be square, got {matrix.shape}")
        if matrix.nnz and matrix.data.min() < 0:
            raise ConfigurationError("Transition matrix has negative entries")

        row_sums = np.asarray(matrix.sum(axis=1)).ravel()
        worst = np.abs(row_sums - 1.0).max() if len(row_sums) else 0.0
        if worst > TOLERANCES.row_sum:
            bad = int(np.abs(row_sums - 1.0).argmax())
            raise ConfigurationError(f"Row {bad} of transition matrix sums to {row_sums[bad]!r}")

        self.matrix = matrix
        self.n_states = matrix.shape[0]
        self._build_inverse_cdf()
        self._rows_py: Optional[List[tuple]] = None

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence[float]], **kwargs) -> 'FiniteKernel':
        """Build from a dense nested sequence"""
        return cls(np.asarray(rows, dtype=np.float64), **kwargs)

    def _build_inverse_cdf(self):
        """Padded per-row successor and cumulative-probability tables"""
        indptr, indices, data = self.matrix.indptr, self.matrix.indices, self.matrix.data
        degrees = np.diff(indptr)
        width = int(degrees.max())

        rows = np.repeat(np.arange(self.n_states), degrees)
        positions = np.arange(len(indices)) - indptr[rows]

        probabilities = np.zeros((self.n_states, width))
        probabilities[rows, positions] = data
        self._cdf = np.cumsum(probabilities, axis=1)
        # Padding above any uniform so padded slots are never selected
        self._cdf[np.arange(width)[None, :] >= degrees[:, None]] = 2.0

        last_successor = indices[indptr[1:] - 1]
        self._successors = np.repeat(last_successor[:, None], width, axis=1).astype(np.int64)
        self._successors[rows, positions] = indices
        self._width = width

    def check_state(self, x: int) -> None:
        if not 0 <= int(x) < self.n_states:
            raise DomainError(f"State index {x} outside [0, {self.n_states}) for kernel '{self.name}'")

    def step(self, states: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        uniforms = np.asarray(uniforms)
        picks = (self._cdf[states] <= uniforms[:, None]).sum(axis=1)
        picks = np.minimum(picks, self._width - 1)
        return self._successors[states, picks]

    def walk(self, x0: int, uniforms: Sequence[float]) -> np.ndarray:
        if self._rows_py is None:
            self._rows_py = [
                (
                    self.matrix.indices[start:stop].tolist(),
                    self._cdf[i, :stop - start].tolist(),
                )
                for i, (start, stop) in enumerate(zip(self.matrix.indptr[:-1], self.matrix.indptr[1:]))
            ]
        rows = self._rows_py
        path = np.empty(len(uniforms), dtype=np.int64)
        x = int(x0)
        for i, u in enumerate(np.asarray(uniforms).tolist()):
            successors, cdf = rows[x]
            k = bisect_right(cdf, u)
            x = successors[k if k < len(successors) else -1]
            path[i] = x
        return path

    def row(self, x: int) -> FiniteDistribution:
        """Transition law P_x(X_1 in .)"""
        self.check_state(x)
        weights = np.zeros(self.n_states)
        start, stop = self.matrix.indptr[x], self.matrix.indptr[x + 1]
        weights[self.matrix.indices[start:stop]] = self.matrix.data[start:stop]
        return FiniteDistribution.normalized(weights)


def sample_step(kernel: ChainKernel, x: int, rng: RngStream) -> int:
    """
    Draw X_1 given X_0 = x

    Args:
        kernel: Transition kernel
        x: Current state index
        rng: Stream supplying exactly one uniform

    Returns:
        Successor state index
    """
    kernel.check_state(x)
    return int(kernel.walk(x, [rng.uniform()])[0])


def transition_matrix(kernel: ChainKernel) -> sp.csr_matrix:
    """Exact one-step matrix of a finite kernel"""
    if not kernel.is_finite:
        raise UnsupportedOperationError(f"Kernel '{kernel.name}' is not finite; no transition matrix")
    return kernel.matrix


def load_matrix(path: Union[str, Path], name: Optional[str] = None) -> FiniteKernel:
    """
    Load a custom finite kernel from disk

    Args:
        path: `.npz` (scipy.sparse.save_npz) or whitespace/comma separated dense text

    Returns:
        FiniteKernel with identity codec

    Raises:
        ConfigurationError: Missing, unreadable or malformed file
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Matrix file not found: {path}")

    if path.suffix not in ('.npz', '.csv', '.txt'):
        raise ConfigurationError(f"Unsupported matrix format: {path.suffix}")

    try:
        if path.suffix == '.npz':
            matrix = sp.load_npz(path)
        else:
            delimiter = ',' if path.suffix == '.csv' else None
            matrix = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    except (ValueError, KeyError, OSError) as e:
        raise ConfigurationError(f"Cannot read transition matrix from {path}: {e}") from e

    return FiniteKernel(matrix, name=name or path.stem)
