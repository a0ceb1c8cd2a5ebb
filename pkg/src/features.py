from dataclasses import dataclass

import numpy as np

from src.constants import FEATURE_CHUNK_SIZE

# upper bound on values held by one chunk's neighbour tensor
CHUNK_ELEMENT_BUDGET = 4_000_000


@dataclass(frozen=True)
class NeighborTensor:
    values: np.ndarray
    mask: np.ndarray
    index: np.ndarray

    @property
    def width(self):
        return self.mask.shape[1]


@dataclass(frozen=True)
class DynamicFeatures:
    phi_i: np.ndarray
    phi_c: np.ndarray

    @property
    def phi_d(self):
        return np.hstack([self.phi_i, self.phi_c])


def build_neighbor_tensor(history, graph, rows=None, width=None):
    """
    Gather neighbour histories into a zero-padded N x M x t tensor.
    Neighbours fill slots in ascending id order; `rows` restricts the gather
    to a block of agents and `width` overrides M (at least the block's max degree).
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 2 or history.shape[1] < 1:
        raise ValueError("history must be an N x t matrix with t >= 1")

    adjacency = graph.adjacency
    rows = np.arange(graph.n_agents) if rows is None else np.asarray(rows, dtype=np.int64)
    starts = adjacency.indptr[rows]
    counts = adjacency.indptr[rows + 1] - starts

    if width is None:
        width = graph.max_degree if rows.size == graph.n_agents else max(int(counts.max(initial=0)), 1)
    if counts.size and counts.max() > width:
        raise ValueError(f"width {width} is smaller than the largest degree {counts.max()}")

    local_row = np.repeat(np.arange(rows.size), counts)
    offsets = np.repeat(starts - np.cumsum(np.concatenate([[0], counts[:-1]])), counts)
    flat = np.arange(counts.sum()) + offsets
    slot = flat - np.repeat(starts, counts)

    index = np.full((rows.size, width), -1, dtype=np.int64)
    index[local_row, slot] = adjacency.indices[flat]
    mask = index >= 0

    values = np.zeros((rows.size, width, history.shape[1]))
    values[mask] = history[index[mask]]
    return NeighborTensor(values, mask.astype(np.float64), index)


def individual_features(history):
    """
    Per-agent [mean, population std, max, min, last] over the history row.
    """
    history = np.asarray(history, dtype=np.float64)
    return np.column_stack([
        history.mean(axis=1),
        history.std(axis=1),
        history.max(axis=1),
        history.min(axis=1),
        history[:, -1]
    ])


def neighbor_features(history, tensor):
    """
    Per-agent [neighbour mean, neighbour std, mean Pearson similarity, echo-chamber score]
    over the masked neighbour slots. `history` holds the rows matching the tensor.
    """
    history = np.asarray(history, dtype=np.float64)
    values, mask = tensor.values, tensor.mask
    t = history.shape[1]
    degree = mask.sum(axis=1)
    has_neighbors = degree > 0
    safe_degree = np.where(has_neighbors, degree, 1.0)

    count = safe_degree * t
    mu_hat = values.sum(axis=(1, 2)) / count
    centered = (values - mu_hat[:, None, None]) * mask[:, :, None]
    sigma_hat = np.sqrt(np.maximum((centered ** 2).sum(axis=(1, 2)) / count, 0.0))

    self_dev = history - history.mean(axis=1, keepdims=True)
    nbr_dev = (values - values.mean(axis=2, keepdims=True)) * mask[:, :, None]
    cov = np.einsum("it,imt->im", self_dev, nbr_dev)
    self_norm = np.sqrt((self_dev ** 2).sum(axis=1))
    nbr_norm = np.sqrt((nbr_dev ** 2).sum(axis=2))

    valid = (mask > 0) & (np.ptp(history, axis=1) > 0)[:, None] & (np.ptp(values, axis=2) > 0)
    valid &= t >= 2
    denom = self_norm[:, None] * nbr_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        pearson = np.where(valid & (denom > 0), cov / denom, 0.0)
    pearson = np.clip(pearson, -1.0, 1.0)

    sim = pearson.sum(axis=1) / safe_degree
    ech = sim / (1.0 + sigma_hat)

    features = np.column_stack([mu_hat, sigma_hat, sim, ech])
    features[~has_neighbors] = 0.0
    return features


def _chunks(graph, t, chunk_size):
    n = graph.n_agents
    rows_per_chunk = max(1, min(chunk_size, CHUNK_ELEMENT_BUDGET // max(graph.max_degree * t, 1)))
    for start in range(0, n, rows_per_chunk):
        yield np.arange(start, min(start + rows_per_chunk, n))


def dynamic_features(history, graph, chunk_size=FEATURE_CHUNK_SIZE):
    """
    Full N x 9 dynamic feature matrix, built block by block so the padded
    neighbour tensor never exceeds the chunk budget.
    """
    history = np.asarray(history, dtype=np.float64)
    phi_i = individual_features(history)
    phi_c = np.zeros((history.shape[0], 4))
    for rows in _chunks(graph, history.shape[1], chunk_size):
        tensor = build_neighbor_tensor(history, graph, rows=rows)
        phi_c[rows] = neighbor_features(history[rows], tensor)
    return DynamicFeatures(phi_i, phi_c)
