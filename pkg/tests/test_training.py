from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from src.config import GmpConfig, TrainingConfig
from src.ingestion import Dataset, DatasetRecord
from src.network import network_for
from src.providers import stub_embed
from src.training import TrainingData, cluster_users, interpolate_trajectories, prepare_training_data, train_gmp


def test_observed_entries_are_kept_and_averaged(rng):
    filled = interpolate_trajectories([[(0, 0.2), (2, 0.6), (2, 0.4)], [(1, -0.5)]], 3, rng)
    assert filled[0, 0] == 0.2
    assert filled[0, 2] == pytest.approx(0.5)
    assert filled[1, 1] == -0.5
    assert np.all(np.abs(filled) <= 1.0)


def test_fill_mixes_own_trend_with_population_draw(rng):
    filled = interpolate_trajectories([[(0, 0.0), (2, 0.0)], [(0, 0.4), (1, 0.4), (2, 0.4)]], 3, rng)
    # population at step 1 is the single observation 0.4 with zero spread
    assert filled[0, 1] == pytest.approx(0.5 * 0.0 + 0.5 * 0.4)


def test_stochastic_half_has_half_population_spread(rng):
    values = rng.normal(0.0, 0.2, size=10_000)
    observations = [[(0, v), (2, v)] for v in values]
    filled = interpolate_trajectories(observations, 3, rng)
    stochastic = filled[:, 1] - 0.5 * values
    pooled_std = np.concatenate([values, values]).std()
    assert stochastic.std() == pytest.approx(0.5 * pooled_std, rel=0.05)


def test_interpolation_rejects_bad_observations(rng):
    with pytest.raises(ValueError):
        interpolate_trajectories([[]], 3, rng)
    with pytest.raises(ValueError):
        interpolate_trajectories([[(3, 0.1)]], 3, rng)


def test_kmeans_separates_two_blobs(rng):
    left = rng.normal(-5.0, 0.3, size=(40, 2))
    right = rng.normal(5.0, 0.3, size=(40, 2))
    result = cluster_users(np.vstack([left, right]), 2, rng)
    assert len(set(result.labels[:40])) == 1
    assert len(set(result.labels[40:])) == 1
    assert result.labels[0] != result.labels[-1]
    assert result.inertia <= result.inertia_history[0]


def test_kmeans_inertia_never_increases(rng):
    for _ in range(10):
        embeddings = rng.normal(size=(200, 6))
        history = cluster_users(embeddings, int(rng.integers(2, 12)), rng).inertia_history
        assert len(history) >= 2
        for previous, current in zip(history, history[1:]):
            assert current <= previous * (1 + 1e-12)


def test_kmeans_one_user_per_cluster(rng):
    embeddings = rng.normal(size=(7, 4))
    result = cluster_users(embeddings, 7, rng)

    assert result.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(result.labels.tolist()) == list(range(7))
    np.testing.assert_allclose(result.centroids[result.labels], embeddings)


def test_kmeans_rejects_too_many_clusters(rng):
    with pytest.raises(ValueError):
        cluster_users(np.zeros((3, 2)), 4, rng)


def test_training_loss_decreases(rng):
    config = GmpConfig(profile_dim=8, hidden_dim=8, heads=2, head_dim=4)
    steps = np.arange(6)
    phases = rng.uniform(0, np.pi, size=(20, 1))
    history = 0.6 * np.sin(0.5 * steps[None, :] + phases)
    data = TrainingData(history, rng.normal(size=(20, 8)), network_for(20, rng))

    result = train_gmp(data, TrainingConfig(epochs=60, learning_rate=1e-2), config, rng)
    assert len(result.losses) == 60
    moving = np.convolve(result.losses, np.ones(10) / 10, mode="valid")
    assert np.all(np.diff(moving) < 0)
    assert result.params.config == config


def test_training_needs_two_steps(rng):
    data = TrainingData(np.zeros((12, 1)), np.zeros((12, 8)), network_for(12, rng))
    with pytest.raises(ValueError):
        train_gmp(data, TrainingConfig(epochs=1), GmpConfig(profile_dim=8), rng)


def test_prepare_training_data_from_dataset(rng):
    start = datetime(2024, 1, 1, tzinfo=timezone.utc)
    records, windows = [], []
    for user in range(12):
        for step in (0, 3):
            records.append(DatasetRecord(f"u{user}", f"fan of topic number {user}", 10, 5, "post",
                                         start + timedelta(hours=step), (-1) ** user * 0.1 * step))
            windows.append(step)
    dataset = Dataset(records, np.array(windows), np.zeros(5), 5)

    data = prepare_training_data(dataset, TrainingConfig(n_virtual_agents=4, train_window=4),
                                 lambda text: stub_embed(text, 16), rng)
    assert data.history.shape[1] == 4
    assert data.history.shape[0] == data.profiles.shape[0] == data.graph.n_agents
    assert data.history.shape[0] <= 4
    assert data.profiles.shape[1] == 16
