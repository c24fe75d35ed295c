"""
Model catalog: kernel, metastable sets, observables and oracle values per model
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from src.chain.kernel import FiniteKernel, load_matrix
from src.metastability.collection import MetastableCollection, MetastableSet
from src.models import biased, entropic
from src.models.oracles import exact_equilibrium
from src.parrep.engine import TabulatedObservable
from src.utils.errors import ConfigurationError, NumericError, OracleError

logger = logging.getLogger(__name__)


@dataclass
class ModelSpec:
    """Everything the harness needs to run one model"""

    name: str
    kernel: FiniteKernel
    sets: List[MetastableSet]
    observables: Dict[str, TabulatedObservable]
    t_corr_ratios: Dict[str, float]
    initial_state: int
    oracle: Dict[str, float] = field(default_factory=dict)

    def collection(self, t_corr: Mapping[str, int], t_phase: Mapping[str, int]) -> MetastableCollection:
        """Materialized collection with the given timing maps"""
        return MetastableCollection(self.sets, t_corr, t_phase, n_states=self.kernel.n_states)

    def select(self, names: Optional[List[str]]) -> Dict[str, TabulatedObservable]:
        """Subset of observables by name (all when names is empty)"""
        if not names:
            return dict(self.observables)
        unknown = [name for name in names if name not in self.observables]
        if unknown:
            raise ConfigurationError(f"Model '{self.name}' has no observables {unknown}")
        return {name: self.observables[name] for name in names}


def _oracle_values(kernel: FiniteKernel, observables: Mapping[str, TabulatedObservable]) -> Dict[str, float]:
    pi = exact_equilibrium(kernel)
    return {name: pi.expectation(f.values) for name, f in observables.items()}


@lru_cache(maxsize=1)
def entropic_model() -> ModelSpec:
    """Two boxes joined by narrow passages; sets are the boxes"""
    kernel = entropic_kernel_cached()
    xs, ys = entropic.decode_array(np.arange(kernel.n_states))
    observables = {
        'x': TabulatedObservable(xs, name='x'),
        'y': TabulatedObservable(ys, name='y'),
        'f': TabulatedObservable(((ys >= 101) & (ys <= 200)).astype(np.float64), name='f'),
    }
    sets = [
        MetastableSet('S1', members=np.arange(entropic.BOX1_SIZE)),
        MetastableSet('S2', members=np.arange(entropic.BOX1_SIZE, entropic.N_STATES)),
    ]
    return ModelSpec(
        name='entropic',
        kernel=kernel,
        sets=sets,
        observables=observables,
        t_corr_ratios={'S1': 1.0, 'S2': 4.0},
        initial_state=kernel.codec.encode((-50, -50)),
        oracle=_oracle_values(kernel, observables),
    )


@lru_cache(maxsize=1)
def entropic_kernel_cached() -> FiniteKernel:
    return entropic.entropic_kernel()


@lru_cache(maxsize=1)
def biased_model() -> ModelSpec:
    """Biased walk on {1..60} with three wells"""
    kernel = biased.biased_kernel()
    xs = np.arange(1, biased.N_STATES + 1, dtype=np.float64)
    observables = {
        'x': TabulatedObservable(xs, name='x'),
        'f': TabulatedObservable((xs >= 31).astype(np.float64), name='f'),
    }
    sets = [
        MetastableSet('S1', members=np.arange(0, 15)),
        MetastableSet('S2', members=np.arange(15, 45)),
        MetastableSet('S3', members=np.arange(45, 60)),
    ]
    return ModelSpec(
        name='biased',
        kernel=kernel,
        sets=sets,
        observables=observables,
        t_corr_ratios={'S1': 1.5, 'S2': 1.5, 'S3': 1.0},
        initial_state=kernel.codec.encode(1),
        oracle=_oracle_values(kernel, observables),
    )


def parse_sets(text: str) -> Dict[str, np.ndarray]:
    """
    Parse `A:0-4,7;B:10-14` into member arrays

    Args:
        text: Semicolon separated `id:items`, items are indices or inclusive ranges

    Returns:
        Set id -> sorted member indices
    """
    sets = {}
    for chunk in filter(None, (part.strip() for part in text.split(';'))):
        if ':' not in chunk:
            raise ConfigurationError(f"Set entry '{chunk}' must look like id:members")
        set_id, items = (part.strip() for part in chunk.split(':', 1))
        members = []
        for item in filter(None, (part.strip() for part in items.split(','))):
            try:
                if '-' in item:
                    lo, hi = (int(v) for v in item.split('-', 1))
                    members.extend(range(lo, hi + 1))
                else:
                    members.append(int(item))
            except ValueError:
                raise ConfigurationError(f"Bad member item '{item}' in set '{set_id}'")
        if not members:
            raise ConfigurationError(f"Set '{set_id}' has no members")
        sets[set_id] = np.unique(members)
    if not sets:
        raise ConfigurationError("No metastable sets declared")
    return sets


def custom_model(matrix_path: Union[str, Path], sets: Union[str, Mapping[str, np.ndarray]]) -> ModelSpec:
    """
    Finite chain loaded from disk with declared sets

    The single observable `index` is the state index; its oracle value is
    computed from the exact equilibrium when that solve succeeds.
    """
    kernel = load_matrix(matrix_path)
    members = parse_sets(sets) if isinstance(sets, str) else dict(sets)
    for set_id, indices in members.items():
        if np.any(np.asarray(indices) >= kernel.n_states) or np.any(np.asarray(indices) < 0):
            raise ConfigurationError(f"Set '{set_id}' has indices outside [0, {kernel.n_states})")

    observables = {'index': TabulatedObservable(np.arange(kernel.n_states, dtype=np.float64), name='index')}
    try:
        oracle = _oracle_values(kernel, observables)
    except NumericError as e:
        logger.warning("No oracle for %s: %s", kernel.name, e)
        oracle = {}
    first_set = next(iter(members.values()))
    return ModelSpec(
        name=kernel.name,
        kernel=kernel,
        sets=[MetastableSet(set_id, members=indices) for set_id, indices in members.items()],
        observables=observables,
        t_corr_ratios={set_id: 1.0 for set_id in members},
        initial_state=int(first_set[0]),
        oracle=oracle,
    )


def load_model(name: str, matrix_path: Optional[str] = None, sets: Optional[str] = None) -> ModelSpec:
    """Catalog lookup by model name"""
    if name == 'entropic':
        return entropic_model()
    if name == 'biased':
        return biased_model()
    if name == 'custom':
        if not matrix_path or not sets:
            raise ConfigurationError("Custom models need matrix_path and sets")
        return custom_model(matrix_path, sets)
    raise ConfigurationError(f"Unknown model '{name}' (expected entropic, biased or custom)")


def reference_values(model: ModelSpec) -> pd.DataFrame:
    """Oracle values as a (model, observable, value) table"""
    if not model.oracle:
        raise OracleError(f"No oracle values for model '{model.name}'")
    return pd.DataFrame(
        [{'model': model.name, 'observable': name, 'value': value} for name, value in model.oracle.items()],
        columns=['model', 'observable', 'value'],
    )


def observables() -> Dict[str, Dict[str, TabulatedObservable]]:
    """Observable definitions of both benchmark models"""
    return {
        'entropic': entropic_model().observables,
        'biased': biased_model().observables,
    }
