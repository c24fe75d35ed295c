"""
Entropic-barrier walk: a 100x100 box and a 200x200 box joined by two one-step passages

Box 1 is {-100..-1}^2, box 2 is {1..200}^2. Each step proposes one of the four
unit moves with probability 1/4; a move leaving the current box is rejected
except through the passages (-1,-1) <-> (1,1) and (-1,-100) <-> (1,100).
"""
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from src.chain.kernel import FiniteKernel, StateCodec
from src.utils.errors import DomainError

BOX1_SIDE = 100
BOX2_SIDE = 200
BOX1_SIZE = BOX1_SIDE * BOX1_SIDE
N_STATES = BOX1_SIZE + BOX2_SIDE * BOX2_SIDE

# (box-1 end, box-2 end) of each passage
PASSAGES = (((-1, -1), (1, 1)), ((-1, -100), (1, 100)))

MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))


class BoxCodec(StateCodec):
    """Row-major over box 1 (by -x, then -y), then row-major over box 2"""

    def encode(self, state: Tuple[int, int]) -> int:
        x, y = state
        index = int(encode_array(np.array([x]), np.array([y]))[0])
        if index < 0:
            raise DomainError(f"({x}, {y}) is not a state of the entropic walk")
        return index

    def decode(self, index: int) -> Tuple[int, int]:
        if not 0 <= index < N_STATES:
            raise DomainError(f"State index {index} outside [0, {N_STATES})")
        xs, ys = decode_array(np.array([index]))
        return int(xs[0]), int(ys[0])


def in_box1(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return (xs <= -1) & (xs >= -BOX1_SIDE) & (ys <= -1) & (ys >= -BOX1_SIDE)


def in_box2(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return (xs >= 1) & (xs <= BOX2_SIDE) & (ys >= 1) & (ys <= BOX2_SIDE)


def encode_array(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized encoding; -1 for points outside both boxes"""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    index = np.full(xs.shape, -1, dtype=np.int64)
    box1 = in_box1(xs, ys)
    box2 = in_box2(xs, ys)
    index[box1] = (-xs[box1] - 1) * BOX1_SIDE + (-ys[box1] - 1)
    index[box2] = BOX1_SIZE + (xs[box2] - 1) * BOX2_SIDE + (ys[box2] - 1)
    return index


def decode_array(index: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinates of state indices"""
    index = np.asarray(index, dtype=np.int64)
    box2 = index >= BOX1_SIZE
    local = np.where(box2, index - BOX1_SIZE, index)
    side = np.where(box2, BOX2_SIDE, BOX1_SIDE)
    first, second = local // side, local % side
    xs = np.where(box2, first + 1, -first - 1)
    ys = np.where(box2, second + 1, -second - 1)
    return xs, ys


def entropic_kernel() -> FiniteKernel:
    """Build the 50,000-state transition matrix"""
    states = np.arange(N_STATES)
    xs, ys = decode_array(states)

    rows, cols = [], []
    for dx, dy in MOVES:
        targets = encode_array(xs + dx, ys + dy)
        # Cross-box targets only count through a passage
        same_box = (targets >= BOX1_SIZE) == (states >= BOX1_SIZE)
        targets = np.where((targets >= 0) & same_box, targets, states)

        for (x1, y1), (x2, y2) in PASSAGES:
            end1 = encode_array(np.array([x1]), np.array([y1]))[0]
            end2 = encode_array(np.array([x2]), np.array([y2]))[0]
            if (dx, dy) == (1, 0):
                targets[end1] = end2
            if (dx, dy) == (-1, 0):
                targets[end2] = end1

        rows.append(states)
        cols.append(targets)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    matrix = sp.csr_matrix((np.full(len(rows), 0.25), (rows, cols)), shape=(N_STATES, N_STATES))
    return FiniteKernel(matrix, name='entropic', codec=BoxCodec())
