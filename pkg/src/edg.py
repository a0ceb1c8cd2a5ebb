import logging
from dataclasses import dataclass

import numpy as np

from src.constants import OPINION_MIN, OPINION_MAX


@dataclass(frozen=True)
class Partition:
    core_ids: np.ndarray
    ordinary_ids: np.ndarray
    entropy: np.ndarray

    @property
    def k(self):
        return int(self.core_ids.size)

    def is_core_mask(self):
        mask = np.zeros(self.entropy.size, dtype=bool)
        mask[self.core_ids] = True
        return mask

    def summary(self, step):
        return {
            "step": int(step),
            "n_core": self.k,
            "n_ordinary": int(self.ordinary_ids.size),
            "mean_entropy": float(self.entropy.mean()) if self.entropy.size else 0.0,
            "max_entropy": float(self.entropy.max()) if self.entropy.size else 0.0,
            "min_core_entropy": float(self.entropy[self.core_ids].min()) if self.k else 0.0
        }


def opinion_bins(values, bins):
    """
    Equal-width bin index over [-1, 1]; the last bin is closed on the right.
    """
    scaled = (np.asarray(values, dtype=np.float64) - OPINION_MIN) / (OPINION_MAX - OPINION_MIN) * bins
    return np.clip(np.floor(scaled).astype(np.int64), 0, bins - 1)


def shannon_entropy(counts):
    """
    Row-wise base-2 entropy of a count matrix, with 0 log 0 = 0 and all-zero rows mapping to 0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def neighborhood_entropy(state, graph, bins, window, agent_ids=None):
    """
    Entropy of each agent's neighbourhood opinion distribution over the last
    min(window, t) committed steps. Pass `agent_ids` to compute a shard.
    """
    if state.step < 1:
        raise ValueError("Entropy needs at least one committed step")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")

    recent = state.history[:, -min(window, state.step):]
    bin_index = opinion_bins(recent, bins)

    own_counts = np.zeros((state.n_agents, bins), dtype=np.float64)
    rows = np.repeat(np.arange(state.n_agents), bin_index.shape[1])
    np.add.at(own_counts, (rows, bin_index.ravel()), 1.0)

    adjacency = graph.binary_adjacency()
    if agent_ids is not None:
        adjacency = adjacency[np.asarray(agent_ids)]
    neighbor_counts = adjacency @ own_counts

    return shannon_entropy(neighbor_counts)


def _top_k(scores, k):
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if k <= 0:
        raise ValueError(f"K must be positive, got {k}")
    if k > n:
        raise ValueError(f"K={k} exceeds population size {n}")
    # primary key: score descending, secondary: agent id ascending
    order = np.lexsort((np.arange(n), -scores))
    core_ids = np.sort(order[:k])
    ordinary_ids = np.sort(order[k:])
    return core_ids, ordinary_ids


def partition_agents(entropy, k):
    """
    Core set = indices of the K largest entropies, ties to the lower id.
    """
    entropy = np.asarray(entropy, dtype=np.float64)
    core_ids, ordinary_ids = _top_k(entropy, k)
    logging.debug(f"EDG partition: {k} core agents, min core entropy {entropy[core_ids].min():.4f}")
    return Partition(core_ids, ordinary_ids, entropy)


def partition_by_degree(graph, k, entropy=None):
    """
    Grouping ablation: core set = K agents with the most followers.
    """
    core_ids, ordinary_ids = _top_k(graph.in_degree, k)
    if entropy is None:
        entropy = np.zeros(graph.n_agents)
    return Partition(core_ids, ordinary_ids, np.asarray(entropy, dtype=np.float64))
