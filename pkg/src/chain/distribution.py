"""
Probability vectors over an enumerated finite state space
"""
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from src.chain.rng import RngStream
from src.utils.config import TOLERANCES
from src.utils.errors import PreconditionError


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Nonnegative weights indexed by state index, summing to one"""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 1:
            raise ValueError(f"Weights must be one-dimensional, got shape {weights.shape}")
        if np.any(weights < 0):
            raise ValueError(f"Weights must be nonnegative (min {weights.min():.3e})")
        total = weights.sum()
        if abs(total - 1.0) > TOLERANCES.distribution_sum:
            raise ValueError(f"Weights must sum to 1, got {total!r}")
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def normalized(cls, weights: Union[np.ndarray, Iterable[float]]) -> 'FiniteDistribution':
        """Build from unnormalized nonnegative weights"""
        weights = np.asarray(weights, dtype=np.float64)
        total = weights.sum()
        if total <= 0:
            raise PreconditionError("Cannot normalize weights with zero total mass")
        return cls(weights / total)

    @classmethod
    def point_mass(cls, n_states: int, index: int) -> 'FiniteDistribution':
        """Dirac mass at one state"""
        weights = np.zeros(n_states)
        weights[index] = 1.0
        return cls(weights)

    @classmethod
    def uniform_on(cls, n_states: int, support: np.ndarray) -> 'FiniteDistribution':
        """Uniform law on a subset of states"""
        weights = np.zeros(n_states)
        weights[np.asarray(support)] = 1.0
        return cls.normalized(weights)

    @property
    def n_states(self) -> int:
        return len(self.weights)

    @property
    def support(self) -> np.ndarray:
        """Indices carrying positive mass"""
        return np.flatnonzero(self.weights > 0)

    def total_variation(self, other: Union['FiniteDistribution', np.ndarray]) -> float:
        """Total-variation distance (half the L1 norm)"""
        other_weights = other.weights if isinstance(other, FiniteDistribution) else np.asarray(other)
        return 0.5 * float(np.abs(self.weights - other_weights).sum())

    def expectation(self, values: np.ndarray) -> float:
        """Expectation of a per-state value table"""
        return float(np.dot(self.weights, values))

    def sample(self, rng: RngStream, size: int) -> np.ndarray:
        """
        Draw iid state indices by inverse CDF

        Args:
            rng: Random stream (one uniform per draw)
            size: Number of draws

        Returns:
            Array of state indices
        """
        support = self.support
        cdf = np.cumsum(self.weights[support])
        positions = np.searchsorted(cdf, rng.uniforms(size) * cdf[-1], side='right')
        return support[np.minimum(positions, len(support) - 1)]
