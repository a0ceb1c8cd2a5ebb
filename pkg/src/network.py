import logging

import networkx as nx
import numpy as np

from src.constants import MIN_IN_DEGREE
from src.models import SocialGraph


def generate_network(n_agents, rng, attachment=MIN_IN_DEGREE):
    """
    Preferential-attachment follow network grown from a complete seed graph
    of attachment + 1 nodes. Every attachment edge becomes a mutual follow,
    so each agent has at least `attachment` followers and the mean in-degree
    sits near 2 * attachment with a heavy upper tail.
    """
    if n_agents < attachment + 1:
        raise ValueError(f"Preferential attachment with m={attachment} needs at least {attachment + 1} agents, "
                         f"got {n_agents}")

    seed = int(rng.integers(0, 2**31 - 1))
    if n_agents == attachment + 1:
        graph = nx.complete_graph(n_agents)
    else:
        graph = nx.barabasi_albert_graph(n_agents, attachment, seed=seed,
                                         initial_graph=nx.complete_graph(attachment + 1))

    pairs = np.array(sorted((min(u, v), max(u, v)) for u, v in graph.edges()), dtype=np.int64)
    follows = np.vstack([pairs, pairs[:, ::-1]])
    social = SocialGraph(n_agents, follows, pairs, np.ones(len(pairs)))

    summary = social.in_degree_summary()
    logging.info(f"Generated network: {n_agents} agents, {len(pairs)} interaction edges, "
                 f"in-degree min={summary['min']} mean={summary['mean']:.2f} max={summary['max']}")
    return social


def complete_network(n_agents):
    """
    All-pairs network for populations too small for preferential attachment.
    """
    if n_agents < 1:
        raise ValueError(f"n_agents must be positive, got {n_agents}")
    ids = np.arange(n_agents)
    i, j = np.triu_indices(n_agents, k=1)
    pairs = np.column_stack([ids[i], ids[j]]).astype(np.int64)
    follows = np.vstack([pairs, pairs[:, ::-1]]) if len(pairs) else np.zeros((0, 2), dtype=np.int64)
    return SocialGraph(n_agents, follows, pairs, np.ones(len(pairs)))


def network_for(n_agents, rng, attachment=MIN_IN_DEGREE):
    if n_agents <= attachment:
        logging.warning(f"{n_agents} agents is below the attachment size {attachment}, using a complete network")
        return complete_network(n_agents)
    return generate_network(n_agents, rng, attachment)
