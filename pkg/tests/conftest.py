import numpy as np
import pytest

from rdpginfer import curve as cv


@pytest.fixture(scope="session")
def hw():
    return cv.hardy_weinberg()


@pytest.fixture(scope="session")
def hw_param(hw):
    return hw.arclength_param()


@pytest.fixture(scope="session")
def hw_length(hw_param):
    return hw_param.total_length


def random_connected_graph(rng, n, p=0.35):
    """Random weighted undirected graph, resampled until connected."""
    from rdpginfer import manifold as mf
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components
    while True:
        ii, jj = np.triu_indices(n, k=1)
        keep = rng.random(ii.size) < p
        if not keep.any():
            continue
        w = rng.uniform(0.1, 2.0, keep.sum())
        g = mf.LocalizationGraph(n, "epsilon", np.inf, ii[keep], jj[keep], w)
        ones = csr_matrix((np.ones(g.n_edges), (g.edge_i, g.edge_j)), shape=(n, n))
        if connected_components(ones, directed=False)[0] == 1:
            return g
