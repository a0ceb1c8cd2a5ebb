import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from src.baselines import abm_step
from src.constants import CENTRALITY_ROUNDS, NEWS_AUTHOR_ID, PERCENTILE_BANDS, REPORT_FIELDS, SYNTHETIC_OPINION_STD
from src.edg import neighborhood_entropy, partition_agents, partition_by_degree
from src.gmp import GmpUpdater, init_params
from src.gom import MemoryGraph, MemoryNode, insert_memory, retrieve, similarity_retrieve
from src.metrics import TrendCurve, evaluate_trend
from src.models import AgentProfile, InboxView, Message, OpinionState, clamp_opinion, seeded_rng
from src.network import network_for
from src.providers import stance_text
from src.utils import log_summary

ROLES = ("student", "teacher", "engineer", "farmer", "journalist", "retiree", "nurse", "shop owner",
         "designer", "civil servant")
INTERESTS = ("sports", "politics", "fashion", "technology", "travel", "food", "music", "finance",
             "environment", "education")
TONES = ("outspoken", "careful", "curious", "skeptical", "cheerful", "pragmatic")

# stream keys for the seeded generators
STREAM_NETWORK, STREAM_OPINIONS, STREAM_PROFILES, STREAM_PARAMS, STREAM_ABM = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class CoreAgentResult:
    agent_id: int
    text: str
    opinion: float
    retrieved: list
    memory_size: int


@dataclass
class SimulationReport:
    trend: TrendCurve
    per_step_partitions: list
    metrics: dict
    centrality_table: dict
    config: dict
    history: np.ndarray = field(default=None, repr=False)
    core_mask: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "trend": [float(v) for v in self.trend.values],
            "per_step_partitions": self.per_step_partitions,
            "metrics": self.metrics,
            "centrality_table": self.centrality_table,
            "config": self.config
        }

    def validate(self, top_k):
        data = self.to_dict()
        missing = [name for name in REPORT_FIELDS if name not in data]
        if missing:
            raise ValueError(f"Report is missing fields: {missing}")
        if len(self.trend) != self.config["t_max"]:
            raise ValueError(f"Trend length {len(self.trend)} does not match t_max {self.config['t_max']}")
        if np.any(np.abs(self.trend.values) > 1.0):
            raise ValueError("Trend leaves [-1, 1]")
        for row in self.centrality_table["rounds"]:
            if sum(row[band] for band in PERCENTILE_BANDS) != top_k:
                raise ValueError(f"Centrality bands at step {row['step']} do not sum to {top_k}")
        return True


def synthetic_descriptions(n_agents, rng):
    roles = rng.integers(len(ROLES), size=n_agents)
    interests = rng.integers(len(INTERESTS), size=n_agents)
    tones = rng.integers(len(TONES), size=n_agents)
    return [f"{TONES[t]} {ROLES[r]} interested in {INTERESTS[i]}" for r, i, t in zip(roles, interests, tones)]


def initial_opinions(n_agents, rng, dataset=None):
    """
    Window-0 dataset opinions sampled with replacement, or Normal(0, 0.3) clamped when synthetic.
    """
    if dataset is not None:
        pool = np.array([r.opinion_value for r, w in zip(dataset.records, dataset.windows) if w == 0])
        return clamp_opinion(rng.choice(pool, size=n_agents, replace=True))
    return clamp_opinion(rng.normal(0.0, SYNTHETIC_OPINION_STD, size=n_agents))


def build_profiles(opinions, graph, providers, rng, dataset=None):
    n_agents = len(opinions)
    if dataset is not None:
        users = list(dataset.profiles().values())
        descriptions = [users[i % len(users)].user_description for i in range(n_agents)]
    else:
        descriptions = synthetic_descriptions(n_agents, rng)

    following = np.bincount(graph.follow_edges[:, 0], minlength=n_agents) if len(graph.follow_edges) \
        else np.zeros(n_agents, dtype=np.int64)
    return [AgentProfile(agent_id=i, description=descriptions[i], follower_count=int(graph.in_degree[i]),
                         following_count=int(following[i]), profile_embedding=providers.embed_profile(descriptions[i]),
                         bias=float(opinions[i]))
            for i in range(n_agents)]


def centrality_rounds(t_max, rounds=CENTRALITY_ROUNDS):
    """
    Sampled rounds clamped to the last executed step (t_max - 1).
    """
    return sorted({min(r, t_max - 1) for r in rounds if min(r, t_max - 1) >= 1})


def core_centrality_report(partitions, graph, rounds=CENTRALITY_ROUNDS):
    """
    Counts of core agents per in-degree percentile band at the sampled steps.
    Agents are ranked by in-degree (ties to the lower id) so each band holds
    a fixed share of the population; the top-20% share is averaged over the
    sampled steps.
    """
    n = graph.n_agents
    order = np.lexsort((np.arange(n), -graph.in_degree))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    quantile = (n - 1 - rank) / n

    rows = []
    for step in rounds:
        if step not in partitions:
            continue
        q = quantile[partitions[step]]
        counts = (
            int(np.sum(q >= 0.8)),
            int(np.sum((q >= 0.6) & (q < 0.8))),
            int(np.sum((q >= 0.4) & (q < 0.6))),
            int(np.sum(q < 0.4))
        )
        row = {"step": int(step), **dict(zip(PERCENTILE_BANDS, counts))}
        row["top20_share"] = counts[0] / max(len(q), 1)
        rows.append(row)

    thresholds = np.percentile(graph.in_degree, [40, 60, 80])
    return {
        "rounds": rows,
        "top20_share": float(np.mean([row["top20_share"] for row in rows])) if rows else 0.0,
        "in_degree": {**graph.in_degree_summary(),
                      "p40": float(thresholds[0]), "p60": float(thresholds[1]), "p80_threshold": float(thresholds[2])}
    }


class SimulationEngine:
    """
    Step-synchronous hybrid simulation: every step regroups agents, runs the
    core agents through memory retrieval, generation and scoring in parallel,
    updates everyone else in one batched pass, and commits the new column.
    """

    def __init__(self, config, providers, graph=None, params=None, dataset=None):
        self.config = config
        self.providers = providers
        self.dataset = dataset
        self.graph = graph or network_for(config.n_agents, seeded_rng(config.seed, STREAM_NETWORK))
        if self.graph.n_agents != config.n_agents:
            raise ValueError(f"Graph has {self.graph.n_agents} agents, config expects {config.n_agents}")

        self.opinions0 = initial_opinions(config.n_agents, seeded_rng(config.seed, STREAM_OPINIONS), dataset)
        self.profiles = build_profiles(self.opinions0, self.graph, providers,
                                       seeded_rng(config.seed, STREAM_PROFILES), dataset)
        self.memories = {}
        self.updater = None

        if config.ordinary_update == "gmp":
            if params is None:
                logging.warning("No GMP checkpoint supplied, ordinary agents use untrained parameters")
                params = init_params(config.gmp, seeded_rng(config.seed, STREAM_PARAMS))
            embeddings = np.vstack([profile.profile_embedding for profile in self.profiles])
            self.updater = GmpUpdater(params, self.graph, embeddings)

    def memory_graph(self, agent_id):
        if agent_id not in self.memories:
            self.memories[agent_id] = MemoryGraph(knn=self.config.gom.knn)
        return self.memories[agent_id]

    def make_message(self, author_id, text, opinion, step):
        return Message(author_id, text, self.providers.embed(text), self.providers.keywords(text), opinion, step)

    def ordinary_post(self, agent_id, opinion, step):
        return self.make_message(agent_id, stance_text(opinion, phrase_index=agent_id), opinion, step)

    def initial_state(self):
        posts = {i: self.ordinary_post(i, self.opinions0[i], 0) for i in range(self.config.n_agents)}
        return OpinionState.initial(self.opinions0, InboxView(self.graph, posts))

    def news_messages(self, step):
        return [self.make_message(NEWS_AUTHOR_ID, text, self.providers.score(text), step)
                for text in self.config.news_at(step)]

    def core_agent_step(self, agent_id, inbox, news, step):
        """
        Observe, recall, act: store neighbour posts as memories, retrieve the
        memories most relevant to what just arrived, generate a post and score it.
        """
        graph = self.memory_graph(agent_id)
        for message in inbox:
            if message.author_id == NEWS_AUTHOR_ID:
                continue
            insert_memory(graph, MemoryNode(len(graph), message.content, message.content_embedding,
                                            message.keyword_embedding, message.opinion, step))

        retrieved = []
        if inbox:
            query = np.mean([message.content_embedding for message in inbox], axis=0)
            norm = np.linalg.norm(query)
            if norm > 0 and len(graph):
                search = retrieve if self.config.memory_retrieval == "gom" else similarity_retrieve
                result = search(graph, query / norm, self.config.gom)
                retrieved = [graph.node(node_id) for node_id in result.selected]

        rng = seeded_rng(self.config.seed, step, agent_id)
        text, _ = self.providers.generate(self.profiles[agent_id], news, retrieved, inbox, rng)
        opinion = clamp_opinion(self.providers.score(text))
        logging.debug(f"Core agent {agent_id} at step {step}: opinion={opinion:.3f}, memories={len(graph)}")
        return CoreAgentResult(agent_id, text, opinion, [node.node_id for node in retrieved], len(graph))

    def partition(self, state):
        entropy = neighborhood_entropy(state, self.graph, self.config.entropy_bins, self.config.entropy_window)
        if self.config.grouping == "degree":
            return partition_by_degree(self.graph, self.config.top_k_core, entropy)
        return partition_agents(entropy, self.config.top_k_core)

    def simulation_step(self, state):
        """
        Produce column `state.step` from the committed history and return the new state with the partition used.
        """
        step = state.step
        partition = self.partition(state)
        news_texts = self.config.news_at(step)
        inbox = state.inbox.with_broadcasts(self.news_messages(step))

        core_results = Parallel(n_jobs=self.config.n_jobs, backend="threading")(
            delayed(self.core_agent_step)(int(agent), inbox[int(agent)], news_texts, step)
            for agent in partition.core_ids
        )
        overrides = {result.agent_id: result.opinion for result in core_results}

        if self.updater is not None:
            column = self.updater.step(state.history, overrides)
        else:
            column = abm_step(self.config.abm.model, state.history, self.graph, self.config.abm,
                              seeded_rng(self.config.seed, STREAM_ABM, step))
            ids = np.fromiter(overrides.keys(), dtype=np.int64)
            column[ids] = np.fromiter(overrides.values(), dtype=np.float64)

        posts = {}
        for agent in range(self.config.n_agents):
            posts[agent] = self.ordinary_post(agent, column[agent], step)
        for result in core_results:
            posts[result.agent_id] = self.make_message(result.agent_id, result.text, result.opinion, step)

        return state.append_column(column, InboxView(self.graph, posts)), partition, core_results

    def run(self, truth=None):
        config = self.config
        if truth is not None and len(truth) != config.t_max:
            raise ValueError(f"Truth curve has {len(truth)} points, expected t_max={config.t_max}")

        state = self.initial_state()
        partitions, summaries = {}, []
        core_mask = np.zeros((config.n_agents, config.t_max), dtype=bool)

        for step in range(1, config.t_max):
            state, partition, _ = self.simulation_step(state)
            partitions[step] = partition.core_ids
            summaries.append(partition.summary(step))
            core_mask[partition.core_ids, step] = True
            logging.info(f"Step {step}/{config.t_max - 1}: mean opinion {state.latest.mean():.4f}, "
                         f"mean entropy {partition.entropy.mean():.4f}")

        trend = TrendCurve.from_history(state.history)
        metrics = evaluate_trend(trend, truth) if truth is not None else None
        centrality = core_centrality_report(partitions, self.graph, centrality_rounds(config.t_max))

        log_summary("Simulation Summary", {
            "Agents": config.n_agents,
            "Steps executed": config.t_max - 1,
            "Core agents per step": config.top_k_core,
            "Final mean opinion": f"{trend.values[-1]:.4f}",
            "Memory nodes stored": sum(len(graph) for graph in self.memories.values()),
            "Top-20% in-degree share of core agents": f"{centrality['top20_share']:.2%}"
        })
        return SimulationReport(trend, summaries, metrics, centrality, config.to_dict(), state.history, core_mask)


def run_simulation(config, providers, params=None, truth=None, graph=None, dataset=None):
    return SimulationEngine(config, providers, graph=graph, params=params, dataset=dataset).run(truth)
