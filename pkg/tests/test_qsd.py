"""
Exact QSD solver, conditioned laws and exit distributions
"""
from itertools import islice

import numpy as np
import pytest

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import FiniteKernel
from src.metastability.collection import MetastableCollection, MetastableSet
from src.qsd import solver
from src.qsd.solver import ExactQSDSampler, conditioned_laws, exact_qsd, exit_distribution, qsd_residual
from src.utils.config import Tolerances
from src.utils.errors import DegenerateSetError, NumericError, PreconditionError


def _single_set(members, n_states):
    return MetastableCollection([MetastableSet('S', members=members)], {'S': 1}, {'S': 1}, n_states=n_states)


def test_one_point_set_is_a_point_mass():
    kernel = FiniteKernel(np.array([[0.5, 0.5], [0.5, 0.5]]))
    coll = _single_set([0], 2)
    nu = exact_qsd(kernel, coll, 'S')
    np.testing.assert_array_equal(nu.weights, [1.0, 0.0])
    assert qsd_residual(kernel, coll, 'S', nu) == 0.0


def test_symmetric_two_state_set():
    rows = np.array([
        [0.3, 0.5, 0.2],
        [0.5, 0.3, 0.2],
        [0.4, 0.4, 0.2],
    ])
    kernel = FiniteKernel(rows)
    nu = exact_qsd(kernel, _single_set([0, 1], 3), 'S')
    np.testing.assert_allclose(nu.weights, [0.5, 0.5, 0.0], atol=1e-12)


def test_periodic_block_converges():
    # Inside S the chain alternates 0 <-> 1; the lazy iteration still converges
    rows = np.array([
        [0.0, 0.9, 0.1],
        [0.9, 0.0, 0.1],
        [0.5, 0.5, 0.0],
    ])
    kernel = FiniteKernel(rows)
    coll = _single_set([0, 1], 3)
    nu = exact_qsd(kernel, coll, 'S', initial=np.array([1.0, 0.0]))
    np.testing.assert_allclose(nu.weights, [0.5, 0.5, 0.0], atol=1e-12)


def test_six_state_qsds(six_state):
    kernel, coll = six_state
    np.testing.assert_allclose(exact_qsd(kernel, coll, 'A').weights[[0, 1]], [0.3, 0.7], atol=1e-10)
    np.testing.assert_allclose(exact_qsd(kernel, coll, 'B').weights[[3, 4]], [0.6, 0.4], atol=1e-10)


@pytest.mark.parametrize('set_id', ['S1', 'S2', 'S3'])
def test_biased_qsd_is_a_fixed_point(biased, biased_coll, set_id):
    nu = exact_qsd(biased.kernel, biased_coll, set_id)
    assert qsd_residual(biased.kernel, biased_coll, set_id, nu) <= 1e-12
    members = biased_coll.members(set_id)
    assert nu.weights[members].min() > 0
    assert nu.weights.sum() - nu.weights[members].sum() == pytest.approx(0.0, abs=1e-15)


def test_biased_s3_matches_dense_eigenvector(biased, biased_coll):
    members = biased_coll.members('S3')
    block = biased.kernel.matrix.toarray()[np.ix_(members, members)]
    values, vectors = np.linalg.eig(block.T)
    leading = np.abs(vectors[:, np.argmax(values.real)].real)
    leading /= leading.sum()

    nu = exact_qsd(biased.kernel, biased_coll, 'S3')
    assert 0.5 * np.abs(nu.weights[members] - leading).sum() < 1e-10


def test_residual_of_uniform_law_is_positive(biased, biased_coll):
    uniform = FiniteDistribution.uniform_on(60, biased_coll.members('S3'))
    assert qsd_residual(biased.kernel, biased_coll, 'S3', uniform) > 0


def test_residual_rejects_mass_outside_set(biased, biased_coll):
    with pytest.raises(PreconditionError):
        qsd_residual(biased.kernel, biased_coll, 'S3', FiniteDistribution.point_mass(60, 0))


@pytest.mark.parametrize('set_id', ['S1', 'S3'])
def test_conditioned_laws_converge_to_qsd(biased, biased_coll, set_id):
    kernel = biased.kernel
    members = biased_coll.members(set_id)
    nu = exact_qsd(kernel, biased_coll, set_id)
    starts = [
        FiniteDistribution.point_mass(60, members[0]),
        FiniteDistribution.point_mass(60, members[-1]),
        FiniteDistribution.point_mass(60, members[len(members) // 2]),
        FiniteDistribution.uniform_on(60, members),
        FiniteDistribution.uniform_on(60, members[::3]),
    ]
    for xi in starts:
        laws = list(islice(conditioned_laws(kernel, biased_coll, set_id, xi), 5000))
        distances = [law.total_variation(nu) for law in laws]
        assert distances[-1] < 1e-10
        assert distances[999] < distances[9]
        assert all(law.weights[members].sum() == pytest.approx(1.0) for law in laws[:10])


def test_degenerate_set():
    kernel = FiniteKernel(np.array([[0.0, 1.0], [0.5, 0.5]]))
    coll = _single_set([0], 2)
    with pytest.raises(DegenerateSetError):
        exact_qsd(kernel, coll, 'S')
    with pytest.raises(DegenerateSetError):
        qsd_residual(kernel, coll, 'S', FiniteDistribution.point_mass(2, 0))


def test_non_convergence_reports_residual(biased, biased_coll, monkeypatch):
    monkeypatch.setattr(solver, 'TOLERANCES', Tolerances(qsd_max_iterations=2))
    with pytest.raises(NumericError) as excinfo:
        exact_qsd(biased.kernel, biased_coll, 'S3')
    assert excinfo.value.residual > 0
    assert excinfo.value.iterations == 2


def test_exit_distribution_from_qsd(six_state):
    kernel, coll = six_state
    nu = exact_qsd(kernel, coll, 'A')
    p, law = exit_distribution(kernel, coll, 'A', nu)
    # Exits from A: 0 -> 2 with 0.1, 1 -> 5 with 0.2
    assert p == pytest.approx(0.3 * 0.1 + 0.7 * 0.2)
    np.testing.assert_allclose(law.weights[[2, 5]], [0.03 / 0.17, 0.14 / 0.17])


def test_sampler_caches_solutions(biased, biased_coll):
    sampler = ExactQSDSampler(biased.kernel, biased_coll)
    assert sampler.qsd('S1') is sampler.qsd('S1')
