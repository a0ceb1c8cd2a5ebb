import numpy as np
import pytest

from src.models import SocialGraph


def star_graph(n_leaves):
    """Hub 0 mutually followed by every leaf."""
    pairs = np.array([(0, leaf) for leaf in range(1, n_leaves + 1)], dtype=np.int64)
    follows = np.vstack([pairs, pairs[:, ::-1]])
    return SocialGraph(n_leaves + 1, follows, pairs, np.ones(len(pairs)))


def random_graph(n_agents, n_edges, rng, weighted=False):
    pairs = set()
    while len(pairs) < n_edges:
        i, j = sorted(rng.choice(n_agents, size=2, replace=False).tolist())
        pairs.add((i, j))
    pairs = np.array(sorted(pairs), dtype=np.int64)
    weights = rng.uniform(0.5, 1.5, size=len(pairs)) if weighted else np.ones(len(pairs))
    return SocialGraph(n_agents, np.vstack([pairs, pairs[:, ::-1]]), pairs, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def star():
    return star_graph(4)
