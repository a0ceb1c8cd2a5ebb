import argparse
import logging
import os

from src.baselines import ABM_MODELS, bench_sequential
from src.checkpoint_utils import CheckpointUtils
from src.config import load_config
from src.constants import BENCH_SIZES, DEFAULT_CHECKPOINT_FILE, OUTPUT_PATH
from src.engine import SimulationEngine
from src.gom import MemoryGraph, MemoryNode, retrieve
from src.ingestion import IngestionHandler, read_curve, read_memory_dump, read_vector
from src.loader import DataLoader
from src.metrics import evaluate_trend
from src.models import seeded_rng
from src.providers import RarityTable, build_providers, stub_keywords
from src.training import prepare_training_data, train_gmp
from src.utils import log_pretty
from src.validation import ValidationHandler

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")


class OpinionSimulationPipeline:
    def __init__(self):
        self.ingestion_handler = IngestionHandler()

    def _config(self, args, **overrides):
        return load_config(getattr(args, "config", None), overrides)

    def _rarity(self, dataset):
        if dataset is None:
            return RarityTable()
        texts = [r.tweet_content for r in dataset.records] + [r.user_description for r in dataset.records]
        return RarityTable.from_texts(texts)

    def simulate(self, args):
        config = self._config(args, **{
            "dataset": args.dataset,
            "providers.kind": args.providers,
            "providers.fallback_stub": True if args.fallback_stub else None
        })

        dataset = None
        if config.dataset:
            logging.info("-----------------------------")
            dataset = self.ingestion_handler.load_dataset(config.dataset, config.t_max)
            logging.info("-----------------------------\n\n")

        truth = read_curve(args.truth) if args.truth else (dataset.truth if dataset is not None else None)
        params = None
        if config.ordinary_update == "gmp" and args.params:
            params = CheckpointUtils.load_params(args.params)

        profile_dim = params.config.profile_dim if params is not None else config.gmp.profile_dim
        providers = build_providers(config.providers, self._rarity(dataset), profile_dim)

        logging.info("-----------------------------")
        report = SimulationEngine(config, providers, params=params, dataset=dataset).run(truth)
        report.validate(config.top_k_core)
        if report.metrics:
            log_pretty(report.metrics)
        logging.info("-----------------------------\n\n")

        logging.info("-----------------------------")
        DataLoader(args.out).save_simulation(report)
        logging.info("-----------------------------\n\n")
        logging.info("Simulation completed.")

    def train(self, args):
        config = self._config(args, **{
            "seed": args.seed,
            "training.epochs": args.epochs,
            "training.learning_rate": args.lr,
            "training.alpha": args.alpha,
            "training.beta": args.beta,
            "training.n_virtual_agents": args.clusters,
            "training.seed": args.seed
        })

        logging.info("-----------------------------")
        dataset = self.ingestion_handler.load_dataset(args.dataset, config.t_max)
        logging.info("-----------------------------\n\n")

        logging.info("-----------------------------")
        providers = build_providers(config.providers, self._rarity(dataset), config.gmp.profile_dim)
        rng = seeded_rng(config.training.seed)
        data = prepare_training_data(dataset, config.training, providers.embed_profile, rng)
        result = train_gmp(data, config.training, config.gmp, rng)
        logging.info("-----------------------------\n\n")

        CheckpointUtils.save_params(result.params, args.out)
        logging.info("Training completed.")

    def retrieve(self, args):
        config = self._config(args, **{
            "gom.knn": args.knn,
            "gom.top_r": args.top_r,
            "gom.nu": args.nu,
            "gom.tau": args.tau,
            "gom.max_iters": args.max_iters
        })
        gom = config.gom.with_mu(args.mu) if args.mu is not None else config.gom

        rows = read_memory_dump(args.memories)
        nodes = [MemoryNode(node_id, content, embedding, stub_keywords(content, embedding.size), opinion)
                 for node_id, opinion, content, embedding in rows]
        graph = MemoryGraph.from_nodes(nodes, knn=gom.knn)
        result = retrieve(graph, read_vector(args.query), gom)

        output = {**result.as_dict(graph), "contents": graph.contents(result.selected), "mu": gom.mu}
        log_pretty(output)
        if args.out:
            DataLoader(os.path.dirname(args.out) or ".").write_yaml(output, os.path.basename(args.out))

    def eval_metrics(self, args):
        metrics = evaluate_trend(read_curve(args.sim), read_curve(args.truth))
        log_pretty(metrics)
        if args.out:
            DataLoader(os.path.dirname(args.out) or ".").write_yaml(metrics, os.path.basename(args.out))

    def bench(self, args):
        config = self._config(args, **{"abm.model": args.model})
        sizes = args.agents or list(BENCH_SIZES)

        logging.info("-----------------------------")
        report = bench_sequential(args.model, sizes, args.steps, args.trials, config.abm, config.seed)
        logging.info("-----------------------------\n\n")
        DataLoader(os.path.dirname(args.out) or ".").write_yaml(report, os.path.basename(args.out))

    def validate(self, args):
        config = self._config(args)
        if not self.ingestion_handler.validate_file_path(args.dataset):
            return
        validator = ValidationHandler(config.t_max)
        validator.run_validations(validator.read_raw_frame(args.dataset), args.out)

    def run(self, action, args):
        if action == "simulate":
            self.simulate(args)
        elif action == "train-gmp":
            self.train(args)
        elif action == "retrieve":
            self.retrieve(args)
        elif action == "eval-metrics":
            self.eval_metrics(args)
        elif action == "bench":
            self.bench(args)
        elif action == "validate":
            self.validate(args)
        elif action == "inspect":
            self.ingestion_handler.inspect_file_schema(args.dataset)
        else:
            logging.error("Invalid action specified.")


def build_parser():
    parser = argparse.ArgumentParser(description="Hybrid Opinion Dynamics Simulation")
    actions = parser.add_subparsers(dest="action", required=True)

    simulate = actions.add_parser("simulate", help="Run a full simulation")
    simulate.add_argument("--config", type=str, help="YAML simulation config")
    simulate.add_argument("--truth", type=str, help="Optional: truth curve, one real per line")
    simulate.add_argument("--providers", choices=["stub", "remote"], help="Override providers.kind")
    simulate.add_argument("--fallback-stub", action="store_true", help="Degrade remote failures to stub answers")
    simulate.add_argument("--params", type=str, help="Optional: GMP checkpoint")
    simulate.add_argument("--dataset", type=str, help="Optional: line-delimited dataset file")
    simulate.add_argument("--out", type=str, default=OUTPUT_PATH)

    train = actions.add_parser("train-gmp", help="Train GMP parameters on a dataset")
    train.add_argument("--dataset", type=str, required=True)
    train.add_argument("--out", type=str, default=DEFAULT_CHECKPOINT_FILE)
    train.add_argument("--config", type=str)
    train.add_argument("--epochs", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--alpha", type=float)
    train.add_argument("--beta", type=float)
    train.add_argument("--clusters", type=int)
    train.add_argument("--seed", type=int)

    retrieval = actions.add_parser("retrieve", help="Retrieve memories for a query embedding")
    retrieval.add_argument("--memories", type=str, required=True)
    retrieval.add_argument("--query", type=str, required=True)
    retrieval.add_argument("--config", type=str)
    retrieval.add_argument("--knn", type=int)
    retrieval.add_argument("--top-r", type=int)
    retrieval.add_argument("--mu", type=float)
    retrieval.add_argument("--nu", type=float)
    retrieval.add_argument("--tau", type=float)
    retrieval.add_argument("--max-iters", type=int)
    retrieval.add_argument("--out", type=str)

    metrics = actions.add_parser("eval-metrics", help="Score a simulated curve against a truth curve")
    metrics.add_argument("--sim", type=str, required=True)
    metrics.add_argument("--truth", type=str, required=True)
    metrics.add_argument("--out", type=str)

    bench = actions.add_parser("bench", help="Time sequential ABM baselines")
    bench.add_argument("--model", choices=ABM_MODELS, default="lorenz")
    bench.add_argument("--agents", type=int, nargs="+")
    bench.add_argument("--steps", type=int, default=1)
    bench.add_argument("--trials", type=int, default=1)
    bench.add_argument("--config", type=str)
    bench.add_argument("--out", type=str, default=os.path.join(OUTPUT_PATH, "bench.yaml"))

    validate = actions.add_parser("validate", help="Write a data quality report for a dataset")
    validate.add_argument("--dataset", type=str, required=True)
    validate.add_argument("--config", type=str)
    validate.add_argument("--out", type=str, default="data_quality_report.csv")

    inspect = actions.add_parser("inspect", help="Describe a dataset file's schema")
    inspect.add_argument("--dataset", type=str, required=True)
    return parser


if __name__ == "__main__":
    """
    Start the simulation pipeline
    """
    args = build_parser().parse_args()

    logging.info(f"Starting action: {args.action}")

    pipeline = OpinionSimulationPipeline()
    pipeline.run(args.action, args)
