"""
Shared fixtures: benchmark models and small hand-checkable chains
"""
import numpy as np
import pytest

from src.chain.kernel import FiniteKernel
from src.metastability.collection import MetastableCollection, MetastableSet
from src.models.catalog import biased_model, entropic_model
from src.models.toy import leaky_chain, six_state_chain


@pytest.fixture(scope='session')
def biased():
    return biased_model()


@pytest.fixture(scope='session')
def entropic():
    return entropic_model()


@pytest.fixture(scope='session')
def biased_coll(biased):
    """Biased walk sets with T_corr = T_phase = 60 in S3 (90 in S1, S2)"""
    times = {'S1': 90, 'S2': 90, 'S3': 60}
    return biased.collection(times, times)


@pytest.fixture
def six_state():
    return six_state_chain(t_corr=3)


@pytest.fixture
def leaky():
    return leaky_chain()


@pytest.fixture
def conveyor():
    """
    Deterministic chain 0->0, 1->2->3->4->5->6->6 with S = {0..4}

    A replica at 0 never leaves; a replica at k in 1..4 leaves at step 5 - k.
    """
    rows = np.zeros((7, 7))
    rows[0, 0] = 1.0
    for x in range(1, 6):
        rows[x, x + 1] = 1.0
    rows[6, 6] = 1.0
    kernel = FiniteKernel(rows, name='conveyor')
    sets = [MetastableSet('S', members=np.arange(5))]
    return kernel, MetastableCollection(sets, {'S': 3}, {'S': 3}, n_states=7)
