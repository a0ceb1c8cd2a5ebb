import socket

import numpy as np
import pytest

from src.config import GmpConfig, SimConfig
from src.constants import PERCENTILE_BANDS
from src.engine import SimulationEngine, centrality_rounds, core_centrality_report, run_simulation
from src.gmp import zero_params
from src.models import SocialGraph
from src.network import generate_network
from src.providers import StubProviders

NEWS = "Breaking: cotton import ban announced"


def small_config(**overrides):
    values = {"n_agents": 40, "t_max": 5, "top_k_core": 5, "seed": 7, "gmp": GmpConfig(profile_dim=16)}
    values.update(overrides)
    return SimConfig(**values).validate()


def stub_providers():
    return StubProviders(profile_dim=16)


def ladder_graph(n):
    # agent i is followed by every agent below it, so in-degree(i) = i
    follows = [(j, i) for i in range(n) for j in range(i)]
    return SocialGraph(n, follows)


def test_centrality_counts_top_agents():
    graph = ladder_graph(10)
    table = core_centrality_report({1: np.array([8, 9]), 5: np.array([0, 1])}, graph, rounds=(1, 5, 10))

    assert [row["step"] for row in table["rounds"]] == [1, 5]
    assert table["rounds"][0][">=p80"] == 2
    assert table["rounds"][0]["top20_share"] == 1.0
    assert table["rounds"][1]["<p40"] == 2
    assert table["top20_share"] == pytest.approx(0.5)
    assert table["in_degree"]["max"] == 9
    for row in table["rounds"]:
        assert sum(row[band] for band in PERCENTILE_BANDS) == 2


def test_centrality_of_random_core_sets_is_near_one_fifth():
    rng = np.random.default_rng(11)
    graph = generate_network(1000, rng)
    partitions = {step: rng.choice(1000, size=100, replace=False) for step in range(50)}
    table = core_centrality_report(partitions, graph, rounds=range(50))

    assert table["top20_share"] == pytest.approx(0.2, abs=0.05)


@pytest.mark.parametrize("t_max, expected", [
    (30, [1, 5, 10, 15, 20, 25, 29]),
    (8, [1, 5, 7]),
    (2, [1]),
    (1, [])
])
def test_centrality_rounds_clamp_to_last_step(t_max, expected):
    assert centrality_rounds(t_max) == expected


def test_centrality_table_covers_final_step():
    report = run_simulation(small_config(), stub_providers())
    steps = [row["step"] for row in report.centrality_table["rounds"]]

    assert steps == [1, 4]
    assert max(steps) <= report.config["t_max"] - 1


def test_small_run_is_deterministic():
    first = run_simulation(small_config(), stub_providers())
    second = run_simulation(small_config(), stub_providers())

    assert len(first.trend) == 5
    np.testing.assert_array_equal(first.trend.values, second.trend.values)
    np.testing.assert_array_equal(first.history, second.history)
    assert first.validate(5)
    assert [row["step"] for row in first.per_step_partitions] == [1, 2, 3, 4]
    assert first.core_mask[:, 0].sum() == 0
    assert (first.core_mask[:, 1:].sum(axis=0) == 5).all()


def test_single_step_run():
    report = run_simulation(small_config(t_max=1), stub_providers())

    assert len(report.trend) == 1
    assert report.per_step_partitions == []
    assert report.centrality_table["rounds"] == []
    assert report.validate(5)


def test_truth_length_must_match():
    engine = SimulationEngine(small_config(), stub_providers())
    with pytest.raises(ValueError, match="t_max"):
        engine.run(truth=np.zeros(3))


def test_metrics_reported_with_truth():
    report = run_simulation(small_config(), stub_providers(), truth=np.linspace(0, 0.4, 5))
    assert set(report.metrics) == {"ΔBias", "ΔDiv", "Corr.", "F."}


def test_every_agent_core_uses_scored_posts():
    report = run_simulation(small_config(top_k_core=40), stub_providers())
    later = report.history[:, 1:]
    stance_values = np.array([2 / 3, 0.0, -2 / 3])

    assert np.all(np.isclose(later[..., None], stance_values).any(axis=-1))
    assert report.core_mask[:, 1:].all()


def test_core_agent_with_empty_inbox():
    engine = SimulationEngine(small_config(), stub_providers())
    result = engine.core_agent_step(3, [], [], step=1)

    assert result.retrieved == []
    assert result.memory_size == 0
    assert result.opinion == 0.0


def test_core_agent_remembers_every_neighbour_post():
    config = small_config()
    engine = SimulationEngine(config, stub_providers())
    first = [engine.ordinary_post(j, opinion, 0) for j, opinion in [(1, 0.8), (2, 0.5), (4, -0.6)]]
    second = [engine.ordinary_post(j, 0.9, 1) for j in (5, 6)]

    assert engine.core_agent_step(0, first, [], step=1).memory_size == 3
    result = engine.core_agent_step(0, second, [], step=2)

    assert result.memory_size == 5
    assert 0 < len(result.retrieved) <= config.gom.top_r
    assert set(result.retrieved) <= set(range(5))


def test_zero_parameters_keep_neutral_population_neutral(monkeypatch):
    monkeypatch.setattr("src.engine.initial_opinions", lambda n_agents, rng, dataset=None: np.zeros(n_agents))
    config = small_config()
    report = run_simulation(config, stub_providers(), params=zero_params(config.gmp))

    np.testing.assert_array_equal(report.trend.values, np.zeros(5))


def test_stub_run_never_touches_the_network(monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    assert run_simulation(small_config(), stub_providers()).validate(5)


@pytest.mark.parametrize("overrides", [
    {"grouping": "degree"},
    {"memory_retrieval": "similarity"},
    {"ordinary_update": "abm"},
])
def test_ablations_run(overrides):
    report = run_simulation(small_config(**overrides), stub_providers())
    assert report.validate(5)
    assert report.config[next(iter(overrides))] == next(iter(overrides.values()))


def test_degree_grouping_picks_most_followed():
    graph = ladder_graph(40)
    report = run_simulation(small_config(grouping="degree"), stub_providers(), graph=graph)

    assert report.core_mask[35:, 1:].all()
    assert not report.core_mask[:35].any()


def test_news_reaches_core_agents_but_not_memory():
    engine = SimulationEngine(small_config(news_schedule=((2, NEWS),)), stub_providers())
    state, _, first = engine.simulation_step(engine.initial_state())
    state, _, second = engine.simulation_step(state)

    assert not any(NEWS in result.text for result in first)
    assert all(result.text.endswith(f"Re: {NEWS}") for result in second)
    for graph in engine.memories.values():
        assert NEWS not in graph.contents(graph.node_ids)


def test_graph_size_must_match_config():
    with pytest.raises(ValueError, match="agents"):
        SimulationEngine(small_config(), stub_providers(), graph=ladder_graph(10))


@pytest.mark.slow
def test_default_scale_run():
    config = SimConfig(n_agents=1000, t_max=30, top_k_core=100, gmp=GmpConfig()).validate()
    report = run_simulation(config, StubProviders())

    assert config.gmp.profile_dim == 768
    assert report.validate(100)
    assert len(report.trend) == 30
    assert report.centrality_table["rounds"][-1]["step"] == 29
    assert 0.0 <= report.centrality_table["top20_share"] <= 1.0
