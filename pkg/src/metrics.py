from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import pearsonr

from src.constants import METRIC_NAMES
from src.models import clamp_opinion


@dataclass(frozen=True)
class TrendCurve:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", clamp_opinion(values) if values.size else values)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_history(cls, history):
        return cls(np.asarray(history, dtype=np.float64).mean(axis=0))


def _as_pair(sim, truth, min_length=1):
    sim = np.asarray(getattr(sim, "values", sim), dtype=np.float64).ravel()
    truth = np.asarray(getattr(truth, "values", truth), dtype=np.float64).ravel()
    if sim.size != truth.size:
        raise ValueError(f"Curve lengths differ: {sim.size} vs {truth.size}")
    if sim.size < min_length:
        raise ValueError(f"Curves need at least {min_length} points, got {sim.size}")
    return sim, truth


def delta_bias(sim, truth):
    sim, truth = _as_pair(sim, truth)
    return float(np.mean(np.abs(truth - sim)))


def delta_div(sim, truth):
    sim, truth = _as_pair(sim, truth)
    return float(np.var(np.abs(truth - sim)))


def pearson_corr(sim, truth):
    """
    Pearson correlation of the two curves; 0 when either is constant.
    """
    sim, truth = _as_pair(sim, truth, min_length=2)
    if np.ptp(sim) == 0 or np.ptp(truth) == 0:
        return 0.0
    return float(np.clip(pearsonr(sim, truth).statistic, -1.0, 1.0))


def _polyline(values):
    n = values.size
    x = np.arange(n) / (n - 1) if n > 1 else np.zeros(1)
    return np.column_stack([x, values])


def frechet_distance(sim, truth):
    """
    Discrete Fréchet distance between the curves as polylines over
    normalised time (t / (t_max - 1), value).
    """
    sim, truth = _as_pair(sim, truth)
    dist = cdist(_polyline(sim), _polyline(truth))
    n, m = dist.shape
    coupling = np.full((n, m), np.inf)
    coupling[0, 0] = dist[0, 0]
    for i in range(1, n):
        coupling[i, 0] = max(coupling[i - 1, 0], dist[i, 0])
    for j in range(1, m):
        coupling[0, j] = max(coupling[0, j - 1], dist[0, j])
    for i in range(1, n):
        for j in range(1, m):
            reach = min(coupling[i - 1, j], coupling[i - 1, j - 1], coupling[i, j - 1])
            coupling[i, j] = max(reach, dist[i, j])
    return float(coupling[-1, -1])


def evaluate_trend(sim, truth):
    """
    All four alignment metrics keyed by their report names.
    Correlation is reported as 0 for single-point curves.
    """
    sim, truth = _as_pair(sim, truth)
    corr = pearson_corr(sim, truth) if sim.size >= 2 else 0.0
    values = (delta_bias(sim, truth), delta_div(sim, truth), corr, frechet_distance(sim, truth))
    return dict(zip(METRIC_NAMES, values))
