"""
Biased nearest-neighbour walk on {1, ..., 60}

From x the walk moves to max(1, x - 1) with probability p_x and to
min(60, x + 1) otherwise; p_x is constant on blocks of 15 states.
"""
import numpy as np
import scipy.sparse as sp

from src.chain.kernel import FiniteKernel, OffsetCodec

N_STATES = 60

# (first state, last state, probability of a left move)
LEFT_PROBABILITIES = (
    (1, 15, 0.6),
    (16, 30, 0.4),
    (31, 45, 0.65),
    (46, 60, 0.35),
)


def left_probabilities() -> np.ndarray:
    """p_x indexed by state index x - 1"""
    p = np.empty(N_STATES)
    for first, last, value in LEFT_PROBABILITIES:
        p[first - 1:last] = value
    return p


def biased_kernel() -> FiniteKernel:
    """Build the 60-state transition matrix"""
    p = left_probabilities()
    index = np.arange(N_STATES)
    left = np.maximum(index - 1, 0)
    right = np.minimum(index + 1, N_STATES - 1)

    rows = np.concatenate([index, index])
    cols = np.concatenate([left, right])
    data = np.concatenate([p, 1.0 - p])
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(N_STATES, N_STATES))
    return FiniteKernel(matrix, name='biased', codec=OffsetCodec(1))
