"""
Small chains used by oracle checks and the exit-law suite
"""
from typing import Tuple

import numpy as np

from src.chain.kernel import FiniteKernel
from src.metastability.collection import MetastableCollection, MetastableSet


def six_state_chain(t_corr: int = 3) -> Tuple[FiniteKernel, MetastableCollection]:
    """
    Two-set chain on {0..5}: A = {0, 1}, B = {3, 4}, states 2 and 5 free

    Inside each set, the part of every member row that stays in the set is
    proportional to one fixed vector (0.3, 0.7 on A; 0.6, 0.4 on B). One step
    conditioned on staying therefore lands exactly on the QSD.
    """
    rows = [
        [0.27, 0.63, 0.10, 0.00, 0.00, 0.00],
        [0.24, 0.56, 0.00, 0.00, 0.00, 0.20],
        [0.30, 0.00, 0.30, 0.40, 0.00, 0.00],
        [0.00, 0.00, 0.15, 0.51, 0.34, 0.00],
        [0.00, 0.00, 0.00, 0.57, 0.38, 0.05],
        [0.00, 0.25, 0.00, 0.00, 0.25, 0.50],
    ]
    kernel = FiniteKernel.from_dense(rows, name='six-state')
    sets = [MetastableSet('A', members=np.array([0, 1])), MetastableSet('B', members=np.array([3, 4]))]
    times = {'A': t_corr, 'B': t_corr}
    return kernel, MetastableCollection(sets, times, times, n_states=kernel.n_states)


def leaky_chain(t_corr: int = 5, t_phase: int = 5) -> Tuple[FiniteKernel, MetastableCollection]:
    """
    Eight-state chain with one set S = {0..4} left after a few tens of steps

    Rows inside S are not proportional, so dephasing actually matters.
    """
    rows = np.zeros((8, 8))
    rows[0, [0, 1]] = [0.6, 0.4]
    rows[1, [0, 1, 2]] = [0.3, 0.4, 0.3]
    rows[2, [1, 2, 3, 5]] = [0.3, 0.3, 0.3, 0.1]
    rows[3, [2, 3, 4, 6]] = [0.35, 0.3, 0.25, 0.1]
    rows[4, [3, 4, 7]] = [0.5, 0.3, 0.2]
    rows[5, [2, 5, 6]] = [0.5, 0.3, 0.2]
    rows[6, [3, 5, 7]] = [0.4, 0.3, 0.3]
    rows[7, [4, 6, 7]] = [0.5, 0.25, 0.25]
    kernel = FiniteKernel(rows, name='leaky')
    sets = [MetastableSet('S', members=np.arange(5))]
    return kernel, MetastableCollection(sets, {'S': t_corr}, {'S': t_phase}, n_states=kernel.n_states)
