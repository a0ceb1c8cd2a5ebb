from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from src.constants import OPINION_MAX, OPINION_MIN, SELF_LOOP_WEIGHT


def seeded_rng(seed, *keys):
    """
    Deterministic random stream derived from the simulation seed.
    Extra integer keys (step, agent id, ...) spawn independent sub-streams,
    so parallel work never shares a generator.
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def clamp_opinion(value):
    """
    Clamp a scalar or array into [-1, 1]. NaN maps to the neutral stance 0.
    """
    clipped = np.clip(np.nan_to_num(np.asarray(value, dtype=np.float64), nan=0.0), OPINION_MIN, OPINION_MAX)
    if clipped.ndim == 0:
        return float(clipped)
    return clipped


@dataclass(frozen=True)
class OpinionValue:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", clamp_opinion(self.value))

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class AgentProfile:
    agent_id: int
    description: str
    follower_count: int
    following_count: int
    profile_embedding: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        if self.agent_id < 0:
            raise ValueError(f"agent_id must be non-negative, got {self.agent_id}")
        if self.follower_count < 0 or self.following_count < 0:
            raise ValueError(f"Negative follow counts for agent {self.agent_id}")
        object.__setattr__(self, "bias", clamp_opinion(self.bias))


@dataclass(frozen=True)
class Message:
    author_id: int
    content: str
    content_embedding: np.ndarray
    keyword_embedding: np.ndarray
    opinion: float
    step: int

    def __post_init__(self):
        object.__setattr__(self, "opinion", clamp_opinion(self.opinion))


@dataclass(frozen=True)
class EdgeIndex:
    """
    Directed edge list of the interaction graph with one self-loop per node,
    sorted by (dst, src). Every node owns at least one edge as destination
    and as source, so segment reductions never see an empty segment.
    """
    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    dst_starts: np.ndarray
    src_order: np.ndarray
    src_starts: np.ndarray

    @classmethod
    def from_arrays(cls, n_nodes, src, dst, weight):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        if src.size and (src.max() >= n_nodes or dst.max() >= n_nodes or min(src.min(), dst.min()) < 0):
            raise ValueError("Edge endpoint out of range")

        loops = np.arange(n_nodes, dtype=np.int64)
        src = np.concatenate([src, loops])
        dst = np.concatenate([dst, loops])
        weight = np.concatenate([weight, np.full(n_nodes, SELF_LOOP_WEIGHT)])

        order = np.lexsort((src, dst))
        src, dst, weight = src[order], dst[order], weight[order]
        dst_starts = np.searchsorted(dst, np.arange(n_nodes))

        src_order = np.argsort(src, kind="stable")
        src_starts = np.searchsorted(src[src_order], np.arange(n_nodes))

        return cls(n_nodes, src, dst, weight, dst_starts, src_order, src_starts)

    @property
    def n_edges(self):
        return int(self.src.size)


class SocialGraph:
    """
    Directed follow network plus the undirected, weighted interaction graph.
    Interaction edges are canonicalised to (min, max) pairs; self-loops and
    repeated pairs are dropped (first weight wins).
    """

    def __init__(self, n_agents, follow_edges, interaction_edges=None, interaction_weights=None):
        if n_agents <= 0:
            raise ValueError(f"n_agents must be positive, got {n_agents}")
        self.n_agents = int(n_agents)
        self.follow_edges = np.asarray(follow_edges, dtype=np.int64).reshape(-1, 2)

        if interaction_edges is None:
            interaction_edges = self.follow_edges
            interaction_weights = None
        pairs = np.asarray(interaction_edges, dtype=np.int64).reshape(-1, 2)
        if interaction_weights is None:
            weights = np.ones(len(pairs))
        else:
            weights = np.asarray(interaction_weights, dtype=np.float64)

        if pairs.size and (pairs.min() < 0 or pairs.max() >= self.n_agents):
            raise ValueError("Interaction edge endpoint out of range")

        keep = pairs[:, 0] != pairs[:, 1]
        pairs, weights = pairs[keep], weights[keep]
        canon = np.sort(pairs, axis=1)
        first = np.sort(np.unique(canon, axis=0, return_index=True)[1]) if len(canon) else np.zeros(0, dtype=np.int64)
        self.interaction_edges = canon[first]
        self.interaction_weights = weights[first]

        rows = np.concatenate([self.interaction_edges[:, 0], self.interaction_edges[:, 1]])
        cols = np.concatenate([self.interaction_edges[:, 1], self.interaction_edges[:, 0]])
        vals = np.concatenate([self.interaction_weights, self.interaction_weights])
        adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_agents, self.n_agents))
        adjacency.sort_indices()
        self.adjacency = adjacency

        self.degree = np.diff(adjacency.indptr)
        self.max_degree = max(int(self.degree.max()), 1)
        self.in_degree = np.bincount(self.follow_edges[:, 1], minlength=self.n_agents) if len(self.follow_edges) \
            else np.zeros(self.n_agents, dtype=np.int64)

    def neighbors(self, agent_id):
        start, end = self.adjacency.indptr[agent_id], self.adjacency.indptr[agent_id + 1]
        return self.adjacency.indices[start:end]

    def neighbor_weights(self, agent_id):
        start, end = self.adjacency.indptr[agent_id], self.adjacency.indptr[agent_id + 1]
        return self.adjacency.data[start:end]

    def binary_adjacency(self):
        binary = self.adjacency.copy()
        binary.data = np.ones_like(binary.data)
        return binary

    def edge_index(self):
        coo = self.adjacency.tocoo()
        return EdgeIndex.from_arrays(self.n_agents, coo.col, coo.row, coo.data)

    def in_degree_summary(self):
        return {
            "min": int(self.in_degree.min()),
            "max": int(self.in_degree.max()),
            "mean": float(self.in_degree.mean()),
            "p50": float(np.percentile(self.in_degree, 50)),
            "p80": float(np.percentile(self.in_degree, 80)),
            "p99": float(np.percentile(self.in_degree, 99))
        }


class InboxView:
    """
    Per-agent inbox assembled on demand from the posts of the previous step:
    agent i sees its interaction neighbours' posts in ascending id order,
    followed by any broadcast messages.
    """

    def __init__(self, graph, posts, broadcasts=()):
        self.graph = graph
        self.posts = posts
        self.broadcasts = tuple(broadcasts)

    def __len__(self):
        return self.graph.n_agents

    def __getitem__(self, agent_id):
        received = [self.posts[j] for j in self.graph.neighbors(agent_id) if self.posts.get(j) is not None]
        return received + list(self.broadcasts)

    def with_broadcasts(self, messages):
        return InboxView(self.graph, self.posts, self.broadcasts + tuple(messages))


def empty_inbox(n_agents):
    return [[] for _ in range(n_agents)]


@dataclass(frozen=True)
class OpinionState:
    history: np.ndarray
    inbox: object = field(default=None)

    def __post_init__(self):
        history = np.asarray(self.history, dtype=np.float64)
        if history.ndim != 2:
            raise ValueError(f"history must be an N x t matrix, got shape {history.shape}")
        history = clamp_opinion(history) if history.size else history
        history.setflags(write=False)
        object.__setattr__(self, "history", history)
        if self.inbox is None:
            object.__setattr__(self, "inbox", empty_inbox(history.shape[0]))

    @classmethod
    def initial(cls, opinions, inbox=None):
        column = np.asarray(opinions, dtype=np.float64).reshape(-1, 1)
        return cls(column, inbox)

    @property
    def step(self):
        return self.history.shape[1]

    @property
    def n_agents(self):
        return self.history.shape[0]

    @property
    def latest(self):
        return self.history[:, -1]

    def append_column(self, column, inbox=None):
        column = np.asarray(column, dtype=np.float64).reshape(-1, 1)
        if column.shape[0] != self.n_agents:
            raise ValueError(f"Column has {column.shape[0]} entries, expected {self.n_agents}")
        return OpinionState(np.hstack([self.history, column]), inbox)
