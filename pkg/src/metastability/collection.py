"""
Metastable collection: disjoint labeled sets with per-set decorrelation and dephasing times
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from src.chain.kernel import ChainKernel, transition_matrix
from src.utils.errors import AbsorbingSetError, ConfigurationError, OverlapError

logger = logging.getLogger(__name__)

NO_SET = -1


@dataclass(frozen=True, eq=False)
class MetastableSet:
    """One metastable set, given by member indices or a vectorized predicate"""

    set_id: str
    members: Optional[np.ndarray] = None
    predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if (self.members is None) == (self.predicate is None):
            raise ConfigurationError(f"Set '{self.set_id}' needs exactly one of members or predicate")
        if self.members is not None:
            object.__setattr__(self, 'members', np.unique(np.asarray(self.members, dtype=np.int64)))

    def contains(self, states: np.ndarray) -> np.ndarray:
        """Boolean membership for an array of state indices"""
        states = np.asarray(states, dtype=np.int64)
        if self.members is not None:
            return np.isin(states, self.members)
        return np.asarray(self.predicate(states), dtype=bool)


@dataclass(frozen=True)
class CollectionDiagnostics:
    """Result of validating a collection against a finite kernel"""

    set_sizes: Dict[str, int]
    exit_mass: Dict[str, float]
    n_unassigned: int
    n_states: int = field(default=0)


class MetastableCollection:
    """Disjoint metastable sets with T_corr(S) and T_phase(S)"""

    def __init__(
        self,
        sets: Sequence[MetastableSet],
        t_corr: Mapping[str, int],
        t_phase: Mapping[str, int],
        n_states: Optional[int] = None
    ):
        """
        Initialize collection

        Args:
            sets: Metastable sets (ids must be unique)
            t_corr: Decorrelation time per set id (>= 1)
            t_phase: Dephasing time per set id (>= 1)
            n_states: Size of a finite state space; when given, membership is
                materialized into a label array and disjointness checked exhaustively
        """
        self.sets: List[MetastableSet] = list(sets)
        self.set_ids: List[str] = [s.set_id for s in self.sets]
        if len(set(self.set_ids)) != len(self.set_ids):
            raise ConfigurationError(f"Duplicate set ids: {self.set_ids}")

        self.t_corr = self._check_times(t_corr, 'T_corr')
        self.t_phase = self._check_times(t_phase, 'T_phase')
        self._position = {set_id: i for i, set_id in enumerate(self.set_ids)}

        self.n_states = n_states
        self._labels: Optional[np.ndarray] = None
        if n_states is not None:
            self._labels = self._materialize(n_states)

    def _check_times(self, times: Mapping[str, int], label: str) -> Dict[str, int]:
        checked = {}
        for set_id in self.set_ids:
            if set_id not in times:
                raise ConfigurationError(f"Missing {label} for set '{set_id}'")
            value = int(times[set_id])
            if value < 1:
                raise ConfigurationError(f"{label}({set_id}) must be >= 1, got {value}")
            checked[set_id] = value
        extra = set(times) - set(self.set_ids)
        if extra:
            raise ConfigurationError(f"{label} references undeclared sets: {sorted(extra)}")
        return checked

    def _materialize(self, n_states: int) -> np.ndarray:
        """Label array over all states; exhaustive disjointness check"""
        labels = np.full(n_states, NO_SET, dtype=np.int64)
        all_states = np.arange(n_states)
        for position, metastable_set in enumerate(self.sets):
            inside = metastable_set.contains(all_states)
            clash = inside & (labels != NO_SET)
            if clash.any():
                other = self.set_ids[labels[np.flatnonzero(clash)[0]]]
                raise OverlapError(
                    f"Sets '{other}' and '{metastable_set.set_id}' overlap on "
                    f"{int(clash.sum())} state(s), e.g. index {int(np.flatnonzero(clash)[0])}"
                )
            labels[inside] = position
        return labels

    def with_times(self, t_corr: Mapping[str, int], t_phase: Mapping[str, int]) -> 'MetastableCollection':
        """Same sets, new timing maps"""
        return MetastableCollection(self.sets, t_corr, t_phase, n_states=self.n_states)

    def position(self, set_id: str) -> int:
        """Integer position of a set id"""
        if set_id not in self._position:
            raise ConfigurationError(f"Unknown set id '{set_id}'")
        return self._position[set_id]

    def labels(self, states: np.ndarray) -> np.ndarray:
        """Set position of each state (NO_SET outside every set)"""
        states = np.asarray(states, dtype=np.int64)
        if self._labels is not None:
            return self._labels[states]

        labels = np.full(states.shape, NO_SET, dtype=np.int64)
        for position, metastable_set in enumerate(self.sets):
            inside = metastable_set.contains(states)
            if np.any(inside & (labels != NO_SET)):
                raise OverlapError(f"Set '{metastable_set.set_id}' overlaps another set at a queried state")
            labels[inside] = position
        return labels

    def members(self, set_id: str) -> np.ndarray:
        """Member indices of a set (finite collections only)"""
        if self._labels is None:
            raise ConfigurationError("Member listing needs a materialized (finite) collection")
        return np.flatnonzero(self._labels == self.position(set_id))

    def __len__(self) -> int:
        return len(self.sets)


def locate(coll: MetastableCollection, x: int) -> Optional[str]:
    """
    Set containing a state

    Args:
        coll: Metastable collection
        x: State index

    Returns:
        The set id, or None outside every set
    """
    label = int(coll.labels(np.array([x]))[0])
    return None if label == NO_SET else coll.set_ids[label]


def validate(coll: MetastableCollection, kernel: ChainKernel) -> CollectionDiagnostics:
    """
    Check disjointness and that no set is absorbing

    A set passes when some member row puts positive mass outside the set.

    Args:
        coll: Metastable collection
        kernel: Finite kernel

    Returns:
        CollectionDiagnostics
    """
    matrix = transition_matrix(kernel)
    labels = coll.labels(np.arange(kernel.n_states))

    set_sizes, exit_mass = {}, {}
    for position, set_id in enumerate(coll.set_ids):
        inside = labels == position
        members = np.flatnonzero(inside)
        set_sizes[set_id] = len(members)
        if len(members) == 0:
            raise ConfigurationError(f"Set '{set_id}' is empty")

        outside = np.flatnonzero(~inside)
        leave = np.asarray(matrix[members][:, outside].sum(axis=1)).ravel()
        exit_mass[set_id] = float(leave.max()) if len(outside) else 0.0
        if exit_mass[set_id] <= 0:
            raise AbsorbingSetError(f"Set '{set_id}' is absorbing: no member row leaves it")
        logger.debug("Set %s: %d states, max exit mass %.3e", set_id, len(members), exit_mass[set_id])

    return CollectionDiagnostics(
        set_sizes=set_sizes,
        exit_mass=exit_mass,
        n_unassigned=int((labels == NO_SET).sum()),
        n_states=kernel.n_states,
    )
