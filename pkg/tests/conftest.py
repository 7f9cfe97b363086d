import numpy as np
import pytest

import scangibbs as sg


@pytest.fixture(scope="session")
def zero_rbm_22():
    return sg.build_rbm(np.zeros((2, 2)), np.zeros(2), np.zeros(2))


@pytest.fixture(scope="session")
def hardcore_k22():
    return sg.build_hardcore_complete_bipartite(2)


@pytest.fixture(scope="session")
def hardcore_k33():
    return sg.build_hardcore_complete_bipartite(3)


@pytest.fixture(scope="session")
def asymmetric_rbm():
    # Asymmetric weights so the alternating scan visibly breaks
    # detailed balance.
    weights = np.array([[1.2, -0.7], [0.4, 0.9], [-1.1, 0.3]])
    return sg.build_rbm(weights, np.array([0.2, -0.4, 0.1]), np.array([-0.3, 0.5]))


def space_of(model, cap=4096):
    return sg.enumerate_state_space(model, cap=cap)
