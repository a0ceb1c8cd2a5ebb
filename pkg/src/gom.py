import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from src.constants import CLOSED_FORM_MAX_NODES, DEFAULT_KNN, DIVERGENCE_PATIENCE
from src.models import clamp_opinion


@dataclass(frozen=True)
class MemoryNode:
    node_id: int
    content: str
    content_embedding: np.ndarray
    keyword_embedding: np.ndarray
    opinion: float
    step_created: int = 0

    def __post_init__(self):
        object.__setattr__(self, "opinion", clamp_opinion(self.opinion))


@dataclass(frozen=True)
class RetrievalResult:
    scores: np.ndarray
    selected: list
    iterations_used: int
    solver: str

    def as_dict(self, graph=None):
        return {
            "solver": self.solver,
            "iterations_used": int(self.iterations_used),
            "selected": [int(i) for i in self.selected],
            "scores": [float(self.scores[graph.index_of(i)]) if graph is not None else None for i in self.selected]
        }


@dataclass(frozen=True)
class PropagationResult:
    scores: np.ndarray
    iterations: int
    converged: bool
    diverged: bool


def row_cosine(matrix, vector):
    """
    Cosine of every row of `matrix` with `vector`; zero-norm rows or vector give 0.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    vector = np.asarray(vector, dtype=np.float64)
    row_norms = np.linalg.norm(matrix, axis=1)
    vec_norm = np.linalg.norm(vector)
    denom = row_norms * vec_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(denom > 0, (matrix @ vector) / denom, 0.0)
    return np.clip(cos, -1.0, 1.0)


class MemoryGraph:
    """
    Append-only signed memory graph of one core agent.

    Each inserted node links to its k most similar existing nodes (content
    cosine) that have not yet received k links, with weight
    w_ij = o_i * o_j * cos(m_i, m_j). Edges are never rewired.
    """

    def __init__(self, knn=DEFAULT_KNN, dim=None):
        if knn < 1:
            raise ValueError(f"knn must be positive, got {knn}")
        self.knn = int(knn)
        self.dim = dim
        self.nodes = []
        self._index = {}
        self._content = None
        self._keywords = None
        self._opinions = np.zeros(0)
        self._incoming = np.zeros(0, dtype=np.int64)
        self._rows, self._cols, self._vals = [], [], []
        self._adjacency = None

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def from_nodes(cls, nodes, knn=DEFAULT_KNN):
        graph = cls(knn=knn)
        for node in nodes:
            graph.insert(node)
        return graph

    @property
    def node_ids(self):
        return np.array([node.node_id for node in self.nodes], dtype=np.int64)

    @property
    def content_matrix(self):
        return self._content[:len(self.nodes)]

    @property
    def keyword_matrix(self):
        return self._keywords[:len(self.nodes)]

    @property
    def opinions(self):
        return self._opinions[:len(self.nodes)]

    def index_of(self, node_id):
        return self._index[node_id]

    def node(self, node_id):
        return self.nodes[self._index[node_id]]

    def _reserve(self, dim):
        n = len(self.nodes)
        if self._content is None:
            self.dim = dim
            capacity = 16
            self._content = np.zeros((capacity, dim))
            self._keywords = np.zeros((capacity, dim))
            self._opinions = np.zeros(capacity)
            self._incoming = np.zeros(capacity, dtype=np.int64)
        elif n == self._content.shape[0]:
            capacity = 2 * n
            self._content = np.vstack([self._content, np.zeros((capacity - n, self.dim))])
            self._keywords = np.vstack([self._keywords, np.zeros((capacity - n, self.dim))])
            self._opinions = np.concatenate([self._opinions, np.zeros(capacity - n)])
            self._incoming = np.concatenate([self._incoming, np.zeros(capacity - n, dtype=np.int64)])

    def insert(self, node):
        if node.node_id in self._index:
            raise ValueError(f"Duplicate memory node id: {node.node_id}")
        content = np.asarray(node.content_embedding, dtype=np.float64).ravel()
        keywords = np.asarray(node.keyword_embedding, dtype=np.float64).ravel()
        if self.dim is not None and (content.size != self.dim or keywords.size != self.dim):
            raise ValueError(f"Embedding dimension {content.size} does not match graph dimension {self.dim}")
        if keywords.size != content.size:
            raise ValueError("Content and keyword embeddings must share a dimension")

        self._reserve(content.size)
        n = len(self.nodes)

        if n:
            open_slots = np.flatnonzero(self._incoming[:n] < self.knn)
            if open_slots.size:
                cos = row_cosine(self._content[open_slots], content)
                order = np.lexsort((open_slots, -cos))[:self.knn]
                targets = open_slots[order]
                weights = node.opinion * self._opinions[targets] * cos[order]
                keep = weights != 0.0
                targets, weights = targets[keep], weights[keep]
                self._incoming[targets] += 1
                self._rows.extend(targets.tolist() + [n] * targets.size)
                self._cols.extend([n] * targets.size + targets.tolist())
                self._vals.extend(weights.tolist() * 2)

        self._content[n] = content
        self._keywords[n] = keywords
        self._opinions[n] = node.opinion
        self._index[node.node_id] = n
        self.nodes.append(node)
        self._adjacency = None
        return self

    @property
    def adjacency(self):
        if self._adjacency is None:
            n = len(self.nodes)
            self._adjacency = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(n, n))
            self._adjacency.sort_indices()
        return self._adjacency

    @property
    def degree(self):
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def contents(self, node_ids):
        return [self.node(i).content for i in node_ids]


def insert_memory(graph, node):
    return graph.insert(node)


def initial_relevance(graph, query, tau):
    query = np.asarray(query, dtype=np.float64).ravel()
    if len(graph) == 0:
        return np.zeros(0)
    if query.size != graph.dim:
        raise ValueError(f"Query dimension {query.size} does not match embedding dimension {graph.dim}")
    content_cos = row_cosine(graph.content_matrix, query)
    keyword_hit = (row_cosine(graph.keyword_matrix, query) >= tau).astype(np.float64)
    return 0.5 * (content_cos + keyword_hit)


def corrected_laplacian(graph, nu, degree_epsilon):
    """
    L' = I - D~^-1/2 W D~^-1/2 + D~^-1/2 Delta D~^-1/2 with
    Delta_ii = nu (sum_j |w_ij| - d_ii) and d~_ii = max(d_ii, eps).
    """
    if len(graph) == 0:
        raise ValueError("Cannot build a Laplacian for an empty memory graph")
    weights = graph.adjacency
    delta = correction_term(graph, nu)
    regularized = np.maximum(graph.degree, degree_epsilon)
    inv_sqrt = sp.diags(1.0 / np.sqrt(regularized))

    n = len(graph)
    laplacian = sp.identity(n, format="csr") + sp.diags(delta / regularized) - inv_sqrt @ weights @ inv_sqrt
    return sp.csr_matrix(laplacian)


def correction_term(graph, nu):
    """
    Gershgorin correction Delta_ii = nu (sum_j |w_ij| - d_ii); zero when all weights are non-negative.
    """
    weights = graph.adjacency
    abs_degree = np.asarray(abs(weights).sum(axis=1)).ravel()
    return nu * (abs_degree - graph.degree)


def system_matrix(laplacian, lambdas):
    lambda1, lambda2, lambda3 = lambdas
    n = laplacian.shape[0]
    return (lambda1 + lambda3) * sp.identity(n, format="csr") + lambda2 * sp.csr_matrix(laplacian)


def first_order_residual(laplacian, scores, f0, lambdas):
    lhs = system_matrix(laplacian, lambdas) @ scores
    return float(np.max(np.abs(lhs - lambdas[0] * np.asarray(f0)))) if len(f0) else 0.0


def retrieval_objective(laplacian, scores, f0, lambdas):
    """
    Q(f) = l1 |f - f0|^2 + l2 f' L' f + l3 |f|^2
    """
    lambda1, lambda2, lambda3 = lambdas
    scores = np.asarray(scores, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    smooth = float(scores @ (laplacian @ scores))
    return float(lambda1 * np.sum((scores - f0) ** 2) + lambda2 * smooth + lambda3 * np.sum(scores ** 2))


def solve_closed_form(laplacian, f0, lambdas):
    f0 = np.asarray(f0, dtype=np.float64)
    n = f0.size
    if n > CLOSED_FORM_MAX_NODES:
        raise ValueError(f"Dense closed form limited to {CLOSED_FORM_MAX_NODES} nodes, got {n}")
    if n == 0:
        return np.zeros(0)

    lambda1, lambda2, lambda3 = lambdas
    if lambda1 + lambda3 <= 0:
        raise ValueError("lambda1 + lambda3 must be positive for a non-singular system")
    dense = laplacian.toarray() if sp.issparse(laplacian) else np.asarray(laplacian, dtype=np.float64)
    system = (lambda1 + lambda3) * np.eye(n) + lambda2 * dense
    rhs = lambda1 * f0
    try:
        factor = la.cho_factor(system)
    except la.LinAlgError as e:
        raise ValueError(f"Retrieval system is not positive definite: {e}")

    scores = la.cho_solve(factor, rhs)
    # one step of iterative refinement
    scores += la.cho_solve(factor, rhs - system @ scores)
    return scores


def solve_sparse(laplacian, f0, lambdas):
    rhs = lambdas[0] * np.asarray(f0, dtype=np.float64)
    return spsolve(system_matrix(laplacian, lambdas).tocsc(), rhs)


def propagation_parameters(config):
    lambda1, lambda2, lambda3 = config.lambdas
    if abs(lambda1 + lambda2 - 1.0) > 1e-12:
        raise ValueError(f"Propagation requires lambda1 + lambda2 = 1, got {lambda1 + lambda2}")
    denom = 2.0 * lambda1 + lambda3 - 1.0
    if denom == 0:
        raise ValueError("2 * lambda1 + lambda3 - 1 = 0 leaves the anchor scale undefined")
    return config.mu, lambda1 / denom


def propagate_retrieval(laplacian, f0, config):
    """
    Fixed-point iteration f <- mu (-L') f + (1 - mu) f0' started at f0'.
    Stops on |f_k+1 - f_k|_inf <= residual_tol or after max_iters; flags
    divergence when the residual grows for consecutive iterations.
    """
    mu, scale = propagation_parameters(config)
    anchor = scale * np.asarray(f0, dtype=np.float64)
    anchor_term = (1.0 - mu) * anchor
    laplacian = sp.csr_matrix(laplacian)

    scores = anchor.copy()
    first_residual = None
    previous = np.inf
    growth = 0
    for iteration in range(1, config.max_iters + 1):
        updated = anchor_term - mu * (laplacian @ scores)
        residual = float(np.max(np.abs(updated - scores))) if scores.size else 0.0
        scores = updated

        if not np.isfinite(residual) or not np.all(np.isfinite(scores)):
            return PropagationResult(scores, iteration, False, True)
        if residual <= config.residual_tol:
            return PropagationResult(scores, iteration, True, False)

        first_residual = residual if first_residual is None else first_residual
        growth = growth + 1 if residual > previous else 0
        if growth >= DIVERGENCE_PATIENCE:
            return PropagationResult(scores, iteration, False, True)
        previous = residual

    diverged = first_residual is not None and previous > first_residual
    return PropagationResult(scores, config.max_iters, False, diverged)


def _top_r(graph, scores, top_r):
    r = min(top_r, len(graph))
    ids = graph.node_ids
    order = np.lexsort((ids, -scores))[:r]
    return ids[order].tolist()


def retrieve(graph, query, config):
    if len(graph) == 0:
        return RetrievalResult(np.zeros(0), [], 0, "propagation")

    f0 = initial_relevance(graph, query, config.tau)
    laplacian = corrected_laplacian(graph, config.nu, config.degree_epsilon)
    result = propagate_retrieval(laplacian, f0, config)

    if result.diverged:
        if len(graph) > CLOSED_FORM_MAX_NODES and config.sparse_fallback:
            scores, solver = solve_sparse(laplacian, f0, config.lambdas), "sparse_fallback"
        else:
            # raises above CLOSED_FORM_MAX_NODES
            scores, solver = solve_closed_form(laplacian, f0, config.lambdas), "closed_form_fallback"
        logging.debug(f"Propagation diverged after {result.iterations} iterations on {len(graph)} nodes, used {solver}")
    else:
        scores, solver = result.scores, "propagation"

    return RetrievalResult(scores, _top_r(graph, scores, config.top_r), result.iterations, solver)


def similarity_retrieve(graph, query, config):
    """
    Memory ablation: rank by initial relevance alone, no graph optimisation.
    """
    if len(graph) == 0:
        return RetrievalResult(np.zeros(0), [], 0, "similarity")
    f0 = initial_relevance(graph, query, config.tau)
    return RetrievalResult(f0, _top_r(graph, f0, config.top_r), 0, "similarity")
