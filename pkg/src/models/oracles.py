"""
Exact equilibrium laws, n-step laws and the serial baseline estimator
"""
import logging
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import ChainKernel, transition_matrix
from src.chain.rng import RngStream
from src.utils.config import TOLERANCES
from src.utils.errors import NumericError, PreconditionError

logger = logging.getLogger(__name__)

SERIAL_CHUNK = 1_000_000


def is_doubly_stochastic(matrix: sp.csr_matrix) -> bool:
    column_sums = np.asarray(matrix.sum(axis=0)).ravel()
    return bool(np.abs(column_sums - 1.0).max() <= TOLERANCES.row_sum)


def is_birth_death(matrix: sp.csr_matrix) -> bool:
    coo = matrix.tocoo()
    return bool(np.all(np.abs(coo.row - coo.col) <= 1))


def equilibrium_residual(matrix: sp.csr_matrix, pi: np.ndarray) -> float:
    """L1 norm of pi P - pi"""
    return float(np.abs(matrix.T @ pi - pi).sum())


def detailed_balance_residual(kernel: ChainKernel, pi: FiniteDistribution) -> float:
    """max_x |pi_x P(x, x+1) - pi_{x+1} P(x+1, x)| for a birth-death chain"""
    matrix = transition_matrix(kernel)
    up = matrix.diagonal(k=1)
    down = matrix.diagonal(k=-1)
    w = pi.weights
    return float(np.abs(w[:-1] * up - w[1:] * down).max())


def _birth_death_equilibrium(matrix: sp.csr_matrix) -> np.ndarray:
    """pi_{x+1} = pi_x P(x, x+1) / P(x+1, x), accumulated in log space"""
    up = matrix.diagonal(k=1)
    down = matrix.diagonal(k=-1)
    if np.any(up <= 0) or np.any(down <= 0):
        raise PreconditionError("Birth-death recurrence needs positive off-diagonal rates")
    log_pi = np.concatenate([[0.0], np.cumsum(np.log(up) - np.log(down))])
    pi = np.exp(log_pi - log_pi.max())
    return pi / pi.sum()


def _power_equilibrium(matrix: sp.csr_matrix) -> np.ndarray:
    n = matrix.shape[0]
    matrix_t = matrix.T.tocsr()
    pi = np.full(n, 1.0 / n)
    if n > 2:
        try:
            _, vectors = eigs(matrix_t, k=1, which='LR', tol=1e-14, maxiter=20_000)
            candidate = np.abs(vectors[:, 0].real)
            if candidate.sum() > 0:
                pi = candidate / candidate.sum()
        except (ArpackNoConvergence, ArpackError) as e:
            logger.debug("ARPACK equilibrium warm start failed: %s", e)

    residual = np.inf
    for _ in range(TOLERANCES.qsd_max_iterations):
        pushed = matrix_t @ pi
        pushed /= pushed.sum()
        residual = float(np.abs(pushed - pi).sum())
        if residual < TOLERANCES.equilibrium_residual:
            return pushed
        pi = 0.5 * (pi + pushed)
    raise NumericError(
        f"Equilibrium power iteration did not converge (residual {residual:.3e})",
        residual=residual,
        iterations=TOLERANCES.qsd_max_iterations,
    )


def exact_equilibrium(kernel: ChainKernel) -> FiniteDistribution:
    """
    Stationary law of a finite ergodic chain

    Doubly stochastic chains are uniform; birth-death chains use the
    detailed-balance recurrence; anything else uses power iteration.

    Args:
        kernel: Finite kernel

    Returns:
        FiniteDistribution with ||pi P - pi||_1 <= equilibrium tolerance

    Raises:
        NumericError: Residual above tolerance
    """
    matrix = transition_matrix(kernel)
    n = matrix.shape[0]

    if is_doubly_stochastic(matrix):
        method = 'uniform'
        pi = np.full(n, 1.0 / n)
    elif is_birth_death(matrix):
        method = 'detailed balance'
        pi = _birth_death_equilibrium(matrix)
    else:
        method = 'power iteration'
        pi = _power_equilibrium(matrix)

    residual = equilibrium_residual(matrix, pi)
    if residual > TOLERANCES.equilibrium_residual:
        raise NumericError(
            f"Equilibrium of '{kernel.name}' by {method} has residual {residual:.3e}",
            residual=residual,
        )
    logger.debug("Equilibrium of %s by %s (residual %.2e)", kernel.name, method, residual)
    return FiniteDistribution.normalized(pi)


def exact_law(kernel: ChainKernel, xi: FiniteDistribution, n: int) -> FiniteDistribution:
    """Law of X_n from X_0 ~ xi (matrix power applied to xi)"""
    matrix_t = transition_matrix(kernel).T.tocsr()
    v = xi.weights.copy()
    for _ in range(n):
        v = matrix_t @ v
    return FiniteDistribution.normalized(v)


def serial_estimate(
    kernel: ChainKernel,
    f,
    xi: Union[int, FiniteDistribution],
    n_steps: int,
    rng: RngStream
) -> float:
    """
    Ergodic average (f(X_0) + ... + f(X_{n-1})) / n over one trajectory

    Args:
        kernel: Transition kernel
        f: Vectorized observable over state indices
        xi: Initial state index or distribution
        n_steps: Trajectory length n (>= 1)
        rng: Stream for the initial draw and every step

    Returns:
        The ergodic average
    """
    if n_steps < 1:
        raise PreconditionError(f"n_steps must be >= 1, got {n_steps}")
    if isinstance(xi, FiniteDistribution):
        x = int(xi.sample(rng, 1)[0])
    else:
        kernel.check_state(int(xi))
        x = int(xi)

    total = float(np.sum(f(np.array([x]))))
    remaining = n_steps - 1
    while remaining > 0:
        take = min(remaining, SERIAL_CHUNK)
        path = kernel.walk(x, rng.uniforms(take))
        total += float(np.sum(f(path)))
        x = int(path[-1])
        remaining -= take
    return total / n_steps
