"""
Exact quasistationary distributions of finite chains

The QSD in S is the normalized left Perron vector of the substochastic block
P restricted to S x S. Power iteration with renormalization is the conditioning
recursion nu_{n+1} = nu_n P|_S / (nu_n P|_S)(S); the solver iterates the lazy
block (I + B) / 2, which has the same Perron vector and also converges when the
block is periodic.
"""
import logging
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import ChainKernel, transition_matrix
from src.metastability.collection import MetastableCollection
from src.utils.config import TOLERANCES
from src.utils.errors import DegenerateSetError, NumericError, PreconditionError

logger = logging.getLogger(__name__)

# Blocks at least this large get an ARPACK warm start
WARM_START_MIN_SIZE = 2000


def _block(kernel: ChainKernel, coll: MetastableCollection, set_id: str) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Member indices of S and the substochastic block P|_{S x S}"""
    members = coll.members(set_id)
    if len(members) == 0:
        raise PreconditionError(f"Set '{set_id}' is empty")
    matrix = transition_matrix(kernel)
    return members, matrix[members][:, members].tocsr()


def _conditioned_step(block_t: sp.csr_matrix, v: np.ndarray, set_id: str) -> np.ndarray:
    """One step of the conditioning recursion on the block"""
    pushed = block_t @ v
    mass = pushed.sum()
    if mass <= 0:
        raise DegenerateSetError(f"Conditioning mass P(X_1 in {set_id}) is zero")
    return pushed / mass


def _warm_start(block: sp.csr_matrix) -> Optional[np.ndarray]:
    """Leading left eigenvector from ARPACK, or None if it fails"""
    try:
        _, vectors = eigs(block.T, k=1, which='LR', tol=1e-14, maxiter=20_000)
    except (ArpackNoConvergence, ArpackError) as e:
        logger.debug("ARPACK warm start failed: %s", e)
        return None
    vector = np.abs(vectors[:, 0].real)
    total = vector.sum()
    return vector / total if total > 0 else None


def exact_qsd(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    initial: Optional[np.ndarray] = None,
    warm_start: bool = True
) -> FiniteDistribution:
    """
    Quasistationary distribution of a finite chain in one metastable set

    Args:
        kernel: Finite kernel
        coll: Collection declaring the set
        set_id: Metastable set id
        initial: Optional starting weights over the members of S
        warm_start: Seed large blocks with an ARPACK eigenvector

    Returns:
        FiniteDistribution over the full state space, supported in S

    Raises:
        NumericError: No convergence within the iteration cap (residual attached)
    """
    members, block = _block(kernel, coll, set_id)
    block_t = block.T.tocsr()
    size = len(members)

    if initial is not None:
        v = np.asarray(initial, dtype=np.float64) / np.sum(initial)
    elif warm_start and size >= WARM_START_MIN_SIZE:
        v = _warm_start(block)
        if v is None:
            v = np.full(size, 1.0 / size)
    else:
        v = np.full(size, 1.0 / size)

    residual = np.inf
    for iteration in range(TOLERANCES.qsd_max_iterations):
        conditioned = _conditioned_step(block_t, v, set_id)
        residual = 0.5 * np.abs(conditioned - v).sum()
        if residual < TOLERANCES.qsd_stop:
            logger.debug("QSD in %s converged after %d iterations (residual %.2e)", set_id, iteration, residual)
            break
        v = 0.5 * (v + conditioned)
    else:
        raise NumericError(
            f"QSD power iteration in '{set_id}' did not converge after "
            f"{TOLERANCES.qsd_max_iterations} iterations (residual {residual:.3e})",
            residual=residual,
            iterations=TOLERANCES.qsd_max_iterations,
        )

    weights = np.zeros(kernel.n_states)
    weights[members] = v
    return FiniteDistribution.normalized(weights)


def qsd_residual(kernel: ChainKernel, coll: MetastableCollection, set_id: str, nu: FiniteDistribution) -> float:
    """
    Distance of nu from its one-step conditioned pushforward

    Args:
        kernel: Finite kernel
        coll: Collection declaring the set
        set_id: Metastable set id
        nu: Candidate distribution supported in S

    Returns:
        TV(nu, P_nu(X_1 in . | X_1 in S)); zero iff nu is the QSD
    """
    members = coll.members(set_id)
    outside_mass = nu.weights.sum() - nu.weights[members].sum()
    if outside_mass > TOLERANCES.distribution_sum:
        raise PreconditionError(f"Distribution has mass {outside_mass:.3e} outside '{set_id}'")

    _, block = _block(kernel, coll, set_id)
    v = nu.weights[members]
    conditioned = _conditioned_step(block.T.tocsr(), v, set_id)
    return 0.5 * float(np.abs(conditioned - v).sum())


def conditioned_laws(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    xi: FiniteDistribution
) -> Iterator[FiniteDistribution]:
    """
    Successive laws P_xi(X_n in . | X_1..X_n in S), n = 1, 2, ...

    Args:
        kernel: Finite kernel
        coll: Collection declaring the set
        set_id: Metastable set id
        xi: Initial law supported in S

    Yields:
        FiniteDistribution for n = 1, 2, ...
    """
    members, block = _block(kernel, coll, set_id)
    block_t = block.T.tocsr()
    v = xi.weights[members] / xi.weights[members].sum()
    while True:
        v = _conditioned_step(block_t, v, set_id)
        weights = np.zeros(kernel.n_states)
        weights[members] = v
        yield FiniteDistribution.normalized(weights)


def exit_distribution(
    kernel: ChainKernel,
    coll: MetastableCollection,
    set_id: str,
    nu: FiniteDistribution
) -> Tuple[float, FiniteDistribution]:
    """
    Exit parameter and exit-state law starting from nu

    From the QSD the exit time is Geometric(p) with p = P_nu(X_1 not in S),
    independent of the exit state, whose law is nu P restricted outside S.

    Returns:
        (p, exit-state law)
    """
    matrix = transition_matrix(kernel)
    pushed = matrix.T @ nu.weights
    pushed[coll.members(set_id)] = 0.0
    p = float(pushed.sum())
    if p <= 0:
        raise DegenerateSetError(f"Set '{set_id}' cannot be left from the given law")
    return p, FiniteDistribution.normalized(pushed)


class ExactQSDSampler:
    """Cached exact QSDs for repeated idealized dephasing"""

    def __init__(self, kernel: ChainKernel, coll: MetastableCollection):
        self.kernel = kernel
        self.coll = coll
        self._cache = {}

    def qsd(self, set_id: str) -> FiniteDistribution:
        if set_id not in self._cache:
            logger.info("Solving exact QSD for set %s", set_id)
            self._cache[set_id] = exact_qsd(self.kernel, self.coll, set_id)
        return self._cache[set_id]
