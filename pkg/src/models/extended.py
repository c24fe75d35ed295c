"""
Exact law of the single-replica extended process (state, sojourn counter)

A state in S carries a counter of consecutive steps spent in S, capped at
T_corr(S). At counter T_corr(S) - 1 the state is replaced by a fresh QSD draw
before stepping. States outside every set always carry counter 0.
"""
import logging
from typing import Mapping, Optional

import numpy as np

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import ChainKernel, transition_matrix
from src.metastability.collection import MetastableCollection
from src.qsd.solver import exact_qsd
from src.utils.config import EXTENDED_STATE_BUDGET
from src.utils.errors import CapacityError

logger = logging.getLogger(__name__)


def propagate_extended_law(
    kernel: ChainKernel,
    coll: MetastableCollection,
    xi: FiniteDistribution,
    n: int,
    t_corr: Optional[Mapping[str, int]] = None
) -> FiniteDistribution:
    """
    Propagate the extended law n steps from (xi, counter 0) and marginalize

    Args:
        kernel: Finite kernel
        coll: Metastable collection
        xi: Initial law of the state (counter starts at zero)
        n: Number of steps
        t_corr: Counter caps per set (collection's T_corr by default)

    Returns:
        Law of the state component after n steps

    Raises:
        CapacityError: n_states * (max T_corr + 1) exceeds the budget
    """
    t_corr = dict(coll.t_corr if t_corr is None else t_corr)
    matrix = transition_matrix(kernel)
    n_states = kernel.n_states
    width = max(t_corr.values()) + 1
    if n_states * width > EXTENDED_STATE_BUDGET:
        raise CapacityError(
            f"Extended law needs {n_states} x {width} states, above the budget of {EXTENDED_STATE_BUDGET}"
        )

    labels = coll.labels(np.arange(n_states))
    outside = np.flatnonzero(labels < 0)
    blocks = []
    for position, set_id in enumerate(coll.set_ids):
        members = np.flatnonzero(labels == position)
        inside = np.zeros(n_states, dtype=bool)
        inside[members] = True
        nu_pushed = matrix.T @ exact_qsd(kernel, coll, set_id).weights
        blocks.append((members, inside, t_corr[set_id], matrix[members].T.tocsr(), nu_pushed))
    from_outside = matrix[outside].T.tocsr()

    law = np.zeros((n_states, width))
    law[:, 0] = xi.weights

    for _ in range(n):
        new = np.zeros_like(law)
        new[:, 0] += from_outside @ law[outside].sum(axis=1)

        for members, inside, cap, rows_t, nu_pushed in blocks:
            pushed = rows_t @ law[members]
            pushed[:, cap - 1] = law[members, cap - 1].sum() * nu_pushed

            new[~inside, 0] += pushed[~inside].sum(axis=1)
            stay = pushed[inside]
            new[inside, 1:cap] += stay[:, :cap - 1]
            new[inside, cap] += stay[:, cap - 1] + stay[:, cap]
        law = new

    marginal = law.sum(axis=1)
    return FiniteDistribution(marginal / marginal.sum())
