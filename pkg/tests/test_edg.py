import numpy as np
import pytest

from src.edg import (neighborhood_entropy, opinion_bins, partition_agents, partition_by_degree,
                     shannon_entropy)
from src.models import OpinionState, SocialGraph
from tests.conftest import random_graph, star_graph


@pytest.mark.parametrize("counts, expected", [
    ([4, 0, 0, 0], 0.0),
    ([2, 2, 0, 0], 1.0),
    ([1, 1, 1, 1], 2.0),
    ([0, 0, 0, 0], 0.0),
])
def test_shannon_entropy_exact_bits(counts, expected):
    assert shannon_entropy(np.array([counts]))[0] == expected


def test_opinion_bins_edges():
    np.testing.assert_array_equal(opinion_bins([-1.0, -0.5, 0.0, 0.49, 1.0], 4), [0, 1, 2, 2, 3])


def test_star_hub_sees_most_diverse_neighbourhood(star):
    state = OpinionState.initial([0.0, -0.95, -0.45, 0.05, 0.55])
    entropy = neighborhood_entropy(state, star, bins=4, window=1)

    assert entropy[0] == 2.0
    np.testing.assert_array_equal(entropy[1:], 0.0)

    partition = partition_agents(entropy, 1)
    np.testing.assert_array_equal(partition.core_ids, [0])
    np.testing.assert_array_equal(partition.ordinary_ids, [1, 2, 3, 4])


def test_window_pools_recent_steps(star):
    history = np.array([
        [0.0, 0.0],
        [-0.9, 0.9],
        [-0.9, 0.9],
        [-0.9, 0.9],
        [-0.9, 0.9],
    ])
    state = OpinionState(history)
    assert neighborhood_entropy(state, star, bins=2, window=1)[0] == 0.0
    assert neighborhood_entropy(state, star, bins=2, window=2)[0] == 1.0
    assert neighborhood_entropy(state, star, bins=2, window=50)[0] == 1.0


def test_entropy_shard_matches_full(rng):
    graph = random_graph(30, 60, rng)
    state = OpinionState(rng.uniform(-1, 1, size=(30, 4)))
    full = neighborhood_entropy(state, graph, bins=10, window=3)
    shard = neighborhood_entropy(state, graph, bins=10, window=3, agent_ids=[3, 7, 29])
    np.testing.assert_array_equal(shard, full[[3, 7, 29]])


def test_hub_entropy_ignores_neighbour_order(rng):
    graph = star_graph(12)
    leaves = rng.uniform(-1, 1, size=(12, 3))
    hub = np.zeros((1, 3))
    base = neighborhood_entropy(OpinionState(np.vstack([hub, leaves])), graph, bins=10, window=3)[0]
    for _ in range(10):
        shuffled = OpinionState(np.vstack([hub, leaves[rng.permutation(12)]]))
        assert neighborhood_entropy(shuffled, graph, bins=10, window=3)[0] == pytest.approx(base, abs=1e-12)


def test_entropy_follows_agent_relabelling(rng):
    graph = random_graph(25, 50, rng)
    history = rng.uniform(-1, 1, size=(25, 2))
    perm = rng.permutation(25)
    relabelled = SocialGraph(25, perm[graph.follow_edges], perm[graph.interaction_edges])
    moved = np.empty_like(history)
    moved[perm] = history

    entropy = neighborhood_entropy(OpinionState(history), graph, bins=10, window=2)
    permuted = neighborhood_entropy(OpinionState(moved), relabelled, bins=10, window=2)
    np.testing.assert_allclose(permuted[perm], entropy, rtol=0, atol=1e-12)


def test_neighbour_in_modal_bin_does_not_raise_entropy(rng):
    bins = 4
    for _ in range(50):
        n_leaves = int(rng.integers(2, 12))
        leaves = rng.uniform(-1, 1, size=n_leaves)
        before = neighborhood_entropy(OpinionState.initial(np.append(0.0, leaves)), star_graph(n_leaves),
                                      bins=bins, window=1)[0]

        modal = np.bincount(opinion_bins(leaves, bins), minlength=bins).argmax()
        joiner = -1.0 + (modal + 0.5) * 2.0 / bins
        after = neighborhood_entropy(OpinionState.initial(np.append([0.0, joiner], leaves)), star_graph(n_leaves + 1),
                                     bins=bins, window=1)[0]
        assert after <= before + 1e-12


def test_neighbour_in_minority_bin_can_raise_entropy():
    # bins over [-1, 1] with 4 bins: -0.75 -> 0, 0.75 -> 3; counts [3, 1] become [3, 2]
    before = neighborhood_entropy(OpinionState.initial([0.0, -0.75, -0.75, -0.75, 0.75]), star_graph(4),
                                  bins=4, window=1)[0]
    after = neighborhood_entropy(OpinionState.initial([0.0, -0.75, -0.75, -0.75, 0.75, 0.75]), star_graph(5),
                                 bins=4, window=1)[0]
    assert before == pytest.approx(0.811278, abs=1e-6)
    assert after == pytest.approx(0.970951, abs=1e-6)


def test_isolated_agent_has_zero_entropy():
    graph = SocialGraph(3, [(0, 1), (1, 0)])
    state = OpinionState.initial([0.5, -0.5, 0.1])
    assert neighborhood_entropy(state, graph, bins=10, window=1)[2] == 0.0


@pytest.mark.parametrize("bins, window", [(1, 1), (10, 0)])
def test_entropy_rejects_bad_parameters(star, bins, window):
    with pytest.raises(ValueError):
        neighborhood_entropy(OpinionState.initial(np.zeros(5)), star, bins=bins, window=window)


def test_partition_is_disjoint_cover(rng):
    entropy = rng.uniform(0, 3, size=40)
    partition = partition_agents(entropy, 7)
    assert partition.k == 7
    assert np.intersect1d(partition.core_ids, partition.ordinary_ids).size == 0
    np.testing.assert_array_equal(np.union1d(partition.core_ids, partition.ordinary_ids), np.arange(40))
    assert entropy[partition.core_ids].min() >= entropy[partition.ordinary_ids].max()
    assert partition.is_core_mask().sum() == 7


def test_partition_ties_go_to_lower_ids():
    partition = partition_agents(np.zeros(6), 2)
    np.testing.assert_array_equal(partition.core_ids, [0, 1])


def test_partition_with_k_equal_to_population():
    partition = partition_agents(np.ones(4), 4)
    assert partition.ordinary_ids.size == 0
    assert partition.summary(3)["n_core"] == 4


@pytest.mark.parametrize("k", [0, 6])
def test_partition_rejects_bad_k(k):
    with pytest.raises(ValueError):
        partition_agents(np.zeros(5), k)


def test_degree_grouping_picks_most_followed(star):
    partition = partition_by_degree(star, 1)
    np.testing.assert_array_equal(partition.core_ids, [0])
    np.testing.assert_array_equal(partition.entropy, np.zeros(5))
