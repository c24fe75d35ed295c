"""
Rejection, Fleming-Viot and exact dephasing
"""
from itertools import islice

import numpy as np
import pytest

from src.chain.distribution import FiniteDistribution
from src.chain.kernel import FiniteKernel
from src.chain.rng import RngStream
from src.evaluation.metrics import empirical_law, lag1_autocorrelation, total_variation
from src.metastability.collection import MetastableCollection, MetastableSet
from src.qsd.dephasing import dephase_exact, dephase_fleming_viot, dephase_rejection
from src.qsd.solver import conditioned_laws, exact_qsd
from src.utils.errors import ExtinctionError, PreconditionError, RejectionBudgetError


def _chain(rows, members):
    kernel = FiniteKernel(np.asarray(rows, dtype=np.float64))
    coll = MetastableCollection([MetastableSet('S', members=members)], {'S': 1}, {'S': 1}, n_states=kernel.n_states)
    return kernel, coll


@pytest.fixture
def trap():
    """From 0 the chain moves to 1 (stays in S = {0, 1} forever) or to 2 (left S for good)"""
    return _chain([[0.0, 0.5, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0, 1])


@pytest.fixture
def cliff():
    """Every step from 0 leaves S = {0, 1}"""
    return _chain([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0, 1])


def _conditioned_law(kernel, coll, set_id, start, steps):
    xi = FiniteDistribution.point_mass(kernel.n_states, start)
    return next(islice(conditioned_laws(kernel, coll, set_id, xi), steps - 1, None))


@pytest.mark.parametrize('dephase', [dephase_rejection, dephase_fleming_viot])
def test_zero_dephasing_time_returns_copies(biased, biased_coll, dephase):
    outcome = dephase(biased.kernel, biased_coll, 'S3', 5, 0, 50, seed=1)
    np.testing.assert_array_equal(outcome.samples, [50] * 5)
    assert outcome.work == 0


@pytest.mark.parametrize('dephase', [dephase_rejection, dephase_fleming_viot])
def test_start_outside_set_is_rejected(biased, biased_coll, dephase):
    with pytest.raises(PreconditionError):
        dephase(biased.kernel, biased_coll, 'S3', 4, 10, 0, seed=1)


def test_fleming_viot_needs_two_walkers(biased, biased_coll):
    with pytest.raises(PreconditionError):
        dephase_fleming_viot(biased.kernel, biased_coll, 'S3', 1, 10, 50, seed=1)


def test_rejection_without_exits_costs_n_times_t_phase():
    kernel, coll = _chain([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]], [0, 1])
    outcome = dephase_rejection(kernel, coll, 'S', 7, 12, 0, seed=3)
    assert outcome.work == 7 * 12
    assert outcome.n_restarts == 0
    assert set(outcome.samples) <= {0, 1}


def test_rejection_keeps_only_survivors(trap):
    kernel, coll = trap
    outcome = dephase_rejection(kernel, coll, 'S', 50, 3, 0, seed=2)
    np.testing.assert_array_equal(outcome.samples, [1] * 50)
    # Each failed attempt costs one step, each success three
    assert outcome.work == outcome.n_restarts + 3 * 50


def test_rejection_budget(cliff):
    kernel, coll = cliff
    with pytest.raises(RejectionBudgetError):
        dephase_rejection(kernel, coll, 'S', 3, 2, 0, seed=1, max_restarts=10)


def test_fleming_viot_moves_exited_walkers_onto_survivors(trap):
    kernel, coll = trap
    for seed in range(20):
        outcome = dephase_fleming_viot(kernel, coll, 'S', 2, 1, 0, seed=seed)
        np.testing.assert_array_equal(outcome.samples, [1, 1])
        assert outcome.work == 2 * (outcome.n_restarts + 1)


def test_fleming_viot_extinction(cliff):
    kernel, coll = cliff
    with pytest.raises(ExtinctionError):
        dephase_fleming_viot(kernel, coll, 'S', 4, 3, 0, seed=1, restart_on_extinction=False)
    with pytest.raises(ExtinctionError):
        dephase_fleming_viot(kernel, coll, 'S', 4, 3, 0, seed=1, max_restarts=5)


@pytest.mark.parametrize('dephase', [dephase_rejection, dephase_fleming_viot])
def test_dephasing_matches_conditioned_law(biased, biased_coll, dephase):
    kernel = biased.kernel
    start = kernel.codec.encode(60)
    target = _conditioned_law(kernel, biased_coll, 'S3', start, 60)
    outcome = dephase(kernel, biased_coll, 'S3', 10_000, 60, start, seed=12)
    members = biased_coll.members('S3')
    assert np.isin(outcome.samples, members).all()
    assert total_variation(empirical_law(outcome.samples, 60), target.weights) < 0.05


def test_dephasing_is_reproducible(biased, biased_coll):
    start = biased.kernel.codec.encode(50)
    for dephase in (dephase_rejection, dephase_fleming_viot):
        first = dephase(biased.kernel, biased_coll, 'S3', 64, 30, start, seed=5, epoch=3)
        second = dephase(biased.kernel, biased_coll, 'S3', 64, 30, start, seed=5, epoch=3)
        other = dephase(biased.kernel, biased_coll, 'S3', 64, 30, start, seed=5, epoch=4)
        np.testing.assert_array_equal(first.samples, second.samples)
        assert first.work == second.work
        assert not np.array_equal(first.samples, other.samples)


def test_longer_dephasing_gets_closer_to_qsd(biased, biased_coll):
    kernel = biased.kernel
    start = kernel.codec.encode(46)
    nu = exact_qsd(kernel, biased_coll, 'S3')
    distances = []
    for t_phase in (5, 40):
        outcome = dephase_fleming_viot(kernel, biased_coll, 'S3', 10_000, t_phase, start, seed=8)
        distances.append(total_variation(empirical_law(outcome.samples, 60), nu.weights))
    assert distances[1] <= distances[0] + 0.03


def test_exact_dephasing_on_one_point_set():
    kernel, coll = _chain([[0.5, 0.5], [0.5, 0.5]], [1])
    outcome = dephase_exact(kernel, coll, 'S', 6, RngStream.create(1, 'exact-qsd'))
    np.testing.assert_array_equal(outcome.samples, [1] * 6)
    assert outcome.work == 0


def test_exact_dephasing_draws_iid_qsd_samples(biased, biased_coll):
    nu = exact_qsd(biased.kernel, biased_coll, 'S1')
    outcome = dephase_exact(biased.kernel, biased_coll, 'S1', 100_000, RngStream.create(4, 'exact-qsd'))
    assert total_variation(empirical_law(outcome.samples, 60), nu.weights) < 0.02
    assert abs(lag1_autocorrelation(outcome.samples)) < 0.02
