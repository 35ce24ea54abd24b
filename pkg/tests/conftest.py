import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def hand_graph_4():
    """Fixed 4-vertex directed graph used by the hand-computed examples."""
    import graphfluct as gf
    xi = np.array([
        [1, 1, 0, 1],
        [0, 1, 1, 0],
        [1, 0, 0, 1],
        [0, 1, 1, 1],
    ])
    return gf.graph_from_adjacency(xi, p=0.5)


@pytest.fixture
def hand_graph_5():
    import graphfluct as gf
    xi = np.array([
        [0, 1, 1, 0, 1],
        [1, 1, 0, 0, 0],
        [0, 0, 1, 1, 1],
        [1, 0, 0, 0, 1],
        [0, 1, 1, 1, 0],
    ])
    return gf.graph_from_adjacency(xi, p=0.5)
