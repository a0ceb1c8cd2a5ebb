import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from src.constants import KMEANS_MAX_ITER
from src.features import dynamic_features
from src.gmp import (backward_and_step, gmp_forward, gmp_loss, gmp_loss_gradient, init_params, project_static)
from src.models import clamp_opinion
from src.network import network_for
from src.utils import log_summary


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list

    @property
    def inertia(self):
        return self.inertia_history[-1]


@dataclass(frozen=True)
class TrainingData:
    history: np.ndarray
    profiles: np.ndarray
    graph: object


@dataclass(frozen=True)
class TrainingResult:
    params: object
    losses: list


def interpolate_trajectories(observations, t_max, rng):
    """
    Dense N x t_max trajectories from sparse (step, value) observations.
    Gaps are filled half by the agent's own linear interpolation (constant
    beyond its first/last observation) and half by a clamped draw from the
    population distribution at that step. Observed entries are kept as-is;
    repeated observations at one step are averaged.
    """
    n = len(observations)
    values = np.full((n, t_max), np.nan)
    for i, points in enumerate(observations):
        if not points:
            raise ValueError(f"Agent {i} has no observations")
        steps = np.array([p[0] for p in points], dtype=np.int64)
        if steps.min() < 0 or steps.max() >= t_max:
            raise ValueError(f"Agent {i} has an observation outside [0, {t_max})")
        opinions = np.array([p[1] for p in points], dtype=np.float64)
        sums = np.bincount(steps, weights=opinions, minlength=t_max)
        counts = np.bincount(steps, minlength=t_max)
        seen = counts > 0
        values[i, seen] = sums[seen] / counts[seen]

    observed = ~np.isnan(values)
    pooled = values[observed]
    column_counts = observed.sum(axis=0)
    safe_counts = np.maximum(column_counts, 1)
    column_mean = np.where(observed, values, 0.0).sum(axis=0) / safe_counts
    column_std = np.sqrt((np.where(observed, values - column_mean, 0.0) ** 2).sum(axis=0) / safe_counts)
    # steps nobody posted at fall back to the pooled distribution
    step_mean = np.where(column_counts > 0, column_mean, pooled.mean())
    step_std = np.where(column_counts > 0, column_std, pooled.std())

    filled = values.copy()
    grid = np.arange(t_max)
    for i in range(n):
        missing = ~observed[i]
        if not missing.any():
            continue
        own = np.interp(grid[missing], grid[observed[i]], values[i, observed[i]])
        drawn = clamp_opinion(rng.normal(step_mean[missing], step_std[missing]))
        filled[i, missing] = 0.5 * own + 0.5 * drawn
    return filled


def cluster_users(embeddings, n_clusters, rng, max_iter=KMEANS_MAX_ITER):
    """
    k-means with k-means++ seeding. An emptied cluster is re-seeded at the
    point farthest from its current centroid.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n_users = embeddings.shape[0]
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be positive, got {n_clusters}")
    if n_users < n_clusters:
        raise ValueError(f"Cannot form {n_clusters} clusters from {n_users} users")

    centroids, _ = kmeans_plusplus(embeddings, n_clusters, random_state=int(rng.integers(0, 2**31 - 1)))
    labels = None
    history = []
    for iteration in range(max_iter):
        distances = cdist(embeddings, centroids, "sqeuclidean")
        new_labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(n_users), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        point_cost = distances[np.arange(n_users), labels]
        for cluster in range(n_clusters):
            members = labels == cluster
            if members.any():
                centroids[cluster] = embeddings[members].mean(axis=0)
            else:
                farthest = int(point_cost.argmax())
                centroids[cluster] = embeddings[farthest]
                point_cost[farthest] = -1.0

    labels = cdist(embeddings, centroids, "sqeuclidean").argmin(axis=1)
    logging.info(f"Clustered {n_users} users into {n_clusters} virtual agents after {len(history)} iterations "
                 f"(inertia {history[-1]:.4f})")
    return ClusterResult(labels, centroids, history)


def prepare_training_data(dataset, training_config, embed_profile, rng):
    """
    Virtual-agent training population: users with at least one post inside the
    training window are embedded, clustered, and their pooled observations
    interpolated over the window; a generated network links the virtual agents.
    """
    window = min(training_config.train_window, dataset.t_max)
    observed = dataset.observations(max_window=window)
    profiles = dataset.profiles()
    user_ids = [user_id for user_id in dataset.user_ids if user_id in observed]
    if not user_ids:
        raise ValueError(f"No observations inside the first {window} windows")

    embeddings = np.vstack([embed_profile(profiles[user_id].user_description) for user_id in user_ids])
    n_clusters = min(training_config.n_virtual_agents, len(user_ids))
    clusters = cluster_users(embeddings, n_clusters, rng, training_config.kmeans_max_iter)

    pooled = [[] for _ in range(n_clusters)]
    for user_id, label in zip(user_ids, clusters.labels):
        pooled[label].extend(observed[user_id])
    pooled = [points for points in pooled if points]
    centroids = np.vstack([clusters.centroids[c] for c in range(n_clusters)
                           if np.any(clusters.labels == c)])

    history = interpolate_trajectories(pooled, window, rng)
    graph = network_for(len(pooled), rng)
    return TrainingData(history, centroids, graph)


def train_gmp(data, training_config, gmp_config, rng, params=None):
    """
    Teacher-forced one-step-ahead training: the prediction for step t uses
    features of the observed history up to t, over the whole window.
    """
    params = params or init_params(gmp_config, rng)
    edges = data.graph.edge_index()
    history = data.history
    steps = history.shape[1]
    if steps < 2:
        raise ValueError("Training needs at least two steps of history")

    features = [dynamic_features(history[:, :t], data.graph).phi_d for t in range(1, steps)]
    truth = history[:, 1:]
    losses = []
    log_every = max(1, training_config.epochs // 10)

    for epoch in range(1, training_config.epochs + 1):
        static_cache = project_static(data.profiles, params)
        predictions, caches = [], []
        for phi_d in features:
            prediction, cache = gmp_forward(phi_d, None, edges, params, static_cache)
            predictions.append(prediction)
            caches.append(cache)
        predicted = np.column_stack(predictions)

        loss = gmp_loss(predicted, truth, training_config.alpha, training_config.beta)
        losses.append(loss)
        grad = gmp_loss_gradient(predicted, truth, training_config.alpha, training_config.beta)
        params, _ = backward_and_step(params, caches, list(grad.T), training_config.learning_rate)

        if epoch % log_every == 0 or epoch == 1:
            logging.info(f"Epoch {epoch}/{training_config.epochs}: loss={loss:.6f}")

    log_summary("Training Summary", {
        "Virtual agents": history.shape[0],
        "Training steps": steps,
        "Epochs": training_config.epochs,
        "Initial loss": f"{losses[0]:.6f}" if losses else "n/a",
        "Final loss": f"{losses[-1]:.6f}" if losses else "n/a",
        "Parameters": params.n_parameters
    })
    return TrainingResult(params, losses)
