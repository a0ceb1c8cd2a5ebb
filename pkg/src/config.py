import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from src.constants import (DEFAULT_ALPHA, DEFAULT_API_KEY_ENV, DEFAULT_BACKOFF_SECONDS, DEFAULT_BETA,
                           DEFAULT_DEGREE_EPSILON, DEFAULT_ENTROPY_BINS, DEFAULT_ENTROPY_WINDOW, DEFAULT_EPOCHS,
                           DEFAULT_KNN, DEFAULT_LAMBDA, DEFAULT_LEARNING_RATE, DEFAULT_MAX_IN_FLIGHT, DEFAULT_MAX_ITERS,
                           DEFAULT_MAX_RETRIES, DEFAULT_NU, DEFAULT_REMOTE_MODEL, DEFAULT_RESIDUAL_TOL, DEFAULT_T_MAX,
                           DEFAULT_TAU, DEFAULT_TIMEOUT_SECONDS, DEFAULT_TOP_K, DEFAULT_TOP_R, DEFAULT_TRAIN_WINDOW,
                           DEFAULT_VIRTUAL_AGENTS, GAT_DEPTH, GAT_HEAD_DIM, GAT_HEADS, KMEANS_MAX_ITER,
                           LEAKY_RELU_SLOPE, MLP_HIDDEN_DIM, PROFILE_DIM)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RetrievalConfig:
    lambda1: float = DEFAULT_LAMBDA
    lambda2: float = DEFAULT_LAMBDA
    lambda3: float = DEFAULT_LAMBDA
    nu: float = DEFAULT_NU
    tau: float = DEFAULT_TAU
    max_iters: int = DEFAULT_MAX_ITERS
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    top_r: int = DEFAULT_TOP_R
    degree_epsilon: float = DEFAULT_DEGREE_EPSILON
    knn: int = DEFAULT_KNN
    sparse_fallback: bool = False

    @property
    def mu(self):
        return self.lambda2 / (1.0 - self.lambda2 + self.lambda3)

    @property
    def lambdas(self):
        return self.lambda1, self.lambda2, self.lambda3

    def with_mu(self, mu):
        """
        Re-derive lambda1/lambda2 from a requested mu, holding lambda3 fixed
        and keeping lambda1 + lambda2 = 1.
        mu = l2 / (1 - l2 + l3)  =>  l2 = mu (1 + l3) / (1 + mu)
        """
        if mu <= 0:
            raise ConfigError(f"mu must be positive, got {mu}")
        lambda2 = mu * (1.0 + self.lambda3) / (1.0 + mu)
        if not 0.0 < lambda2 < 1.0:
            raise ConfigError(f"mu={mu} gives lambda2={lambda2:.4f} outside (0, 1) for lambda3={self.lambda3}")
        return replace(self, lambda1=1.0 - lambda2, lambda2=lambda2)

    def validate(self):
        if min(self.lambda1, self.lambda2, self.lambda3) <= 0:
            raise ConfigError(f"lambdas must be positive, got {self.lambdas}")
        if abs(self.lambda1 + self.lambda2 - 1.0) > 1e-12:
            raise ConfigError(f"lambda1 + lambda2 must equal 1 for propagation, got {self.lambda1 + self.lambda2}")
        if self.nu < 1:
            raise ConfigError(f"nu must be >= 1, got {self.nu}")
        if self.max_iters < 1 or self.top_r < 1 or self.knn < 1:
            raise ConfigError("max_iters, top_r and knn must be positive")
        if self.residual_tol <= 0 or self.degree_epsilon <= 0:
            raise ConfigError("residual_tol and degree_epsilon must be positive")
        return self


@dataclass(frozen=True)
class GmpConfig:
    profile_dim: int = PROFILE_DIM
    hidden_dim: int = MLP_HIDDEN_DIM
    heads: int = GAT_HEADS
    head_dim: int = GAT_HEAD_DIM
    depth: int = GAT_DEPTH
    leaky_slope: float = LEAKY_RELU_SLOPE

    def validate(self):
        if min(self.profile_dim, self.hidden_dim, self.heads, self.head_dim) < 1:
            raise ConfigError("GMP dimensions must be positive")
        if self.depth < 1:
            raise ConfigError(f"GAT depth must be >= 1, got {self.depth}")
        if not 0 <= self.leaky_slope < 1:
            raise ConfigError(f"leaky_slope must lie in [0, 1), got {self.leaky_slope}")
        return self


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = DEFAULT_EPOCHS
    train_window: int = DEFAULT_TRAIN_WINDOW
    n_virtual_agents: int = DEFAULT_VIRTUAL_AGENTS
    kmeans_max_iter: int = KMEANS_MAX_ITER
    seed: int = 0

    def validate(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"alpha and beta must be non-negative, got {self.alpha}, {self.beta}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.train_window < 2:
            raise ConfigError(f"train_window must be >= 2, got {self.train_window}")
        if self.n_virtual_agents < 1 or self.kmeans_max_iter < 1:
            raise ConfigError("n_virtual_agents and kmeans_max_iter must be positive")
        return self


@dataclass(frozen=True)
class AbmConfig:
    model: str = "lorenz"
    confidence_epsilon: float = 0.3
    uncertainty: float = 0.4
    convergence_mu: float = 0.3
    assimilation: float = 0.2
    contrast: float = 0.1
    assimilation_threshold: float = 0.4
    contrast_threshold: float = 1.2

    def validate(self):
        if self.model not in ("hk", "ra", "lorenz"):
            raise ConfigError(f"Unknown ABM model: {self.model}")
        if not 0 < self.confidence_epsilon <= 2:
            raise ConfigError(f"confidence_epsilon must lie in (0, 2], got {self.confidence_epsilon}")
        if not 0 < self.convergence_mu <= 0.5:
            raise ConfigError(f"convergence_mu must lie in (0, 0.5], got {self.convergence_mu}")
        if self.uncertainty <= 0:
            raise ConfigError(f"uncertainty must be positive, got {self.uncertainty}")
        if self.assimilation < 0 or self.contrast < 0:
            raise ConfigError("assimilation and contrast strengths must be non-negative")
        if not 0 <= self.assimilation_threshold <= self.contrast_threshold:
            raise ConfigError("assimilation_threshold must not exceed contrast_threshold")
        return self


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "stub"
    endpoint: str = ""
    model: str = DEFAULT_REMOTE_MODEL
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_seconds: float = DEFAULT_BACKOFF_SECONDS
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    fallback_stub: bool = False
    topic: str = "the current public debate"

    def validate(self):
        if self.kind not in ("stub", "remote"):
            raise ConfigError(f"Unknown provider kind: {self.kind}")
        if self.timeout_seconds <= 0 or self.max_in_flight < 1 or self.max_retries < 1:
            raise ConfigError("timeout, retries and in-flight limit must be positive")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("Remote providers require an endpoint")
        return self


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 1000
    t_max: int = DEFAULT_T_MAX
    top_k_core: int = DEFAULT_TOP_K
    entropy_bins: int = DEFAULT_ENTROPY_BINS
    entropy_window: int = DEFAULT_ENTROPY_WINDOW
    seed: int = 0
    news_schedule: tuple = ()
    grouping: str = "entropy"
    memory_retrieval: str = "gom"
    ordinary_update: str = "gmp"
    n_jobs: int = 1
    dataset: str = ""
    gom: RetrievalConfig = field(default_factory=RetrievalConfig)
    gmp: GmpConfig = field(default_factory=GmpConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    abm: AbmConfig = field(default_factory=AbmConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)

    def validate(self):
        if self.n_agents < 1:
            raise ConfigError(f"n_agents must be positive, got {self.n_agents}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if not 0 < self.top_k_core <= self.n_agents:
            raise ConfigError(f"top_k_core must lie in (0, n_agents], got {self.top_k_core}")
        if self.entropy_bins < 2:
            raise ConfigError(f"entropy_bins must be >= 2, got {self.entropy_bins}")
        if self.entropy_window < 1:
            raise ConfigError(f"entropy_window must be >= 1, got {self.entropy_window}")
        if self.grouping not in ("entropy", "degree"):
            raise ConfigError(f"Unknown grouping: {self.grouping}")
        if self.memory_retrieval not in ("gom", "similarity"):
            raise ConfigError(f"Unknown memory_retrieval: {self.memory_retrieval}")
        if self.ordinary_update not in ("gmp", "abm"):
            raise ConfigError(f"Unknown ordinary_update: {self.ordinary_update}")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be non-zero")
        for step, text in self.news_schedule:
            if step < 1 or not isinstance(text, str):
                raise ConfigError(f"Invalid news schedule entry: ({step}, {text!r})")
        for section in (self.gom, self.gmp, self.training, self.abm, self.providers):
            section.validate()
        return self

    def news_at(self, step):
        return [text for at, text in self.news_schedule if at == step]

    def to_dict(self):
        data = asdict(self)
        data["news_schedule"] = [{"step": step, "text": text} for step, text in self.news_schedule]
        return data


SECTIONS = {
    "gom": RetrievalConfig,
    "gmp": GmpConfig,
    "training": TrainingConfig,
    "abm": AbmConfig,
    "providers": ProviderConfig
}


def _build_section(cls, values, name):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in section '{name}': {unknown}")
    return cls(**values)


def _parse_news(entries):
    schedule = []
    for entry in entries or []:
        if isinstance(entry, dict):
            schedule.append((int(entry["step"]), str(entry["text"])))
        else:
            step, text = entry
            schedule.append((int(step), str(text)))
    return tuple(sorted(schedule, key=lambda item: item[0]))


def config_from_dict(data):
    data = dict(data or {})
    sections = {name: _build_section(cls, data.pop(name, None), name) for name, cls in SECTIONS.items()}
    if "news_schedule" in data:
        data["news_schedule"] = _parse_news(data["news_schedule"])

    known = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown top-level config keys: {unknown}")

    return SimConfig(**data, **sections).validate()


def load_config(path=None, overrides=None):
    """
    Read a YAML simulation config. Missing file means all defaults.
    `overrides` is a flat mapping (CLI flags) applied over the file values;
    dotted keys such as "gom.knn" address a section.
    """
    data = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"Config file does not exist: {path}")
        with open(path, "r") as file:
            data = yaml.safe_load(file) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"Config file must hold a mapping: {path}")
        logging.info(f"Loaded config from {path}")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            data.setdefault(section, {})
            if data[section] is None:
                data[section] = {}
            data[section][name] = value
        else:
            data[key] = value

    return config_from_dict(data)


def dump_config(config, path):
    with open(path, "w") as file:
        yaml.safe_dump(config.to_dict(), file, sort_keys=False)
