import numpy as np
import pytest

from src.network import complete_network, generate_network, network_for


@pytest.fixture(scope="module")
def large_network():
    return generate_network(10_000, np.random.default_rng(2024))


def test_min_in_degree_floor(large_network):
    assert large_network.in_degree.min() >= 10


def test_mean_in_degree_band(large_network):
    assert 15 <= large_network.in_degree.mean() <= 25


def test_in_degree_is_heavy_tailed(large_network):
    summary = large_network.in_degree_summary()
    assert summary["p99"] / summary["p50"] >= 3


def test_interaction_edges_mirror_follows(large_network):
    assert large_network.adjacency.nnz == large_network.follow_edges.shape[0]
    np.testing.assert_array_equal(large_network.interaction_weights, 1.0)
    np.testing.assert_array_equal(large_network.degree, large_network.in_degree)


def test_generation_is_seeded():
    a = generate_network(300, np.random.default_rng(5))
    b = generate_network(300, np.random.default_rng(5))
    np.testing.assert_array_equal(a.interaction_edges, b.interaction_edges)


def test_generation_needs_room_for_attachment():
    with pytest.raises(ValueError):
        generate_network(10, np.random.default_rng(0))
    assert generate_network(11, np.random.default_rng(0)).in_degree.min() == 10


def test_small_populations_fall_back_to_complete_network():
    graph = network_for(4, np.random.default_rng(0))
    np.testing.assert_array_equal(graph.degree, [3, 3, 3, 3])
    assert complete_network(1).adjacency.nnz == 0
