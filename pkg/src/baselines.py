import logging
import time

import numpy as np

from src.config import AbmConfig, GmpConfig
from src.constants import (BENCH_EXTRAPOLATE_AGENTS, BENCH_EXTRAPOLATE_STEPS, BENCH_SIZES, SYNTHETIC_OPINION_STD)
from src.gmp import GmpUpdater, init_params
from src.models import clamp_opinion, seeded_rng
from src.network import generate_network
from src.utils import log_summary

ABM_MODELS = ("hk", "ra", "lorenz")

# the bench only needs the GAT pass; a narrow profile keeps the one-off static projection small
BENCH_PROFILE_DIM = 16


def _hk_update(own, neighbor_values, config, rng):
    pool = np.append(neighbor_values, own)
    close = pool[np.abs(pool - own) <= config.confidence_epsilon]
    return close.mean()


def _ra_update(own, neighbor_values, config, rng):
    if neighbor_values.size == 0:
        return own
    other = neighbor_values[rng.integers(neighbor_values.size)]
    u = config.uncertainty
    overlap = 2.0 * u - abs(own - other)
    if overlap <= u:
        return own
    return own + config.convergence_mu * (overlap / u - 1.0) * (other - own)


def _lorenz_update(own, neighbor_values, config, rng):
    if neighbor_values.size == 0:
        return own
    gaps = neighbor_values - own
    distance = np.abs(gaps)
    pull = np.where(distance < config.assimilation_threshold, config.assimilation * gaps, 0.0)
    push = np.where(distance > config.contrast_threshold, -config.contrast * gaps, 0.0)
    return own + np.mean(pull + push)


UPDATES = {"hk": _hk_update, "ra": _ra_update, "lorenz": _lorenz_update}


def abm_step(model, history, graph, config, rng):
    """
    One synchronous step of a classical opinion model. Agents are visited one
    at a time in id order and read only the previous column.
    """
    if model not in UPDATES:
        raise ValueError(f"Unknown ABM model: {model}")
    history = np.asarray(getattr(history, "history", history), dtype=np.float64)
    if history.ndim != 2 or history.shape[1] < 1:
        raise ValueError("ABM step needs at least one committed step")

    update = UPDATES[model]
    previous = history[:, -1]
    column = np.empty_like(previous)
    for agent in range(previous.size):
        column[agent] = update(previous[agent], previous[graph.neighbors(agent)], config, rng)
    return clamp_opinion(column)


def run_abm(model, initial, graph, config, steps, rng):
    history = np.asarray(initial, dtype=np.float64)
    if history.ndim == 1:
        history = history[:, None]
    columns = [history]
    for _ in range(steps):
        columns.append(abm_step(model, columns[-1], graph, config, rng)[:, None])
    return np.hstack(columns)


def _timed(fn, trials):
    timings = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return float(np.median(timings))


def time_abm_step(model, n_agents, steps, trials, config, seed):
    rng = seeded_rng(seed, n_agents)
    graph = generate_network(n_agents, rng)
    initial = clamp_opinion(rng.normal(0.0, SYNTHETIC_OPINION_STD, size=(n_agents, 1)))
    elapsed = _timed(lambda: run_abm(model, initial, graph, config, steps, rng), trials)
    return elapsed / steps, graph, initial


def time_gmp_step(graph, initial, trials, seed):
    rng = seeded_rng(seed, graph.n_agents, 1)
    gmp_config = GmpConfig(profile_dim=BENCH_PROFILE_DIM)
    params = init_params(gmp_config, rng)
    profiles = rng.normal(size=(graph.n_agents, BENCH_PROFILE_DIM))
    updater = GmpUpdater(params, graph, profiles)
    return _timed(lambda: updater.step(initial), trials)


def bench_sequential(model, sizes=BENCH_SIZES, steps=1, trials=1, config=None, seed=0, include_gmp=True):
    """
    Sequential ABM wall time per step across population sizes, a linear fit
    extrapolated to BENCH_EXTRAPOLATE_AGENTS x BENCH_EXTRAPOLATE_STEPS, the
    doubling ratio at the smallest size, and the speed-up of one batched GMP step.
    """
    config = config or AbmConfig(model=model)
    sizes = sorted(int(n) for n in sizes)
    if not sizes or steps < 1 or trials < 1:
        raise ValueError("Benchmark needs at least one size, step and trial")

    per_step, gmp_per_step = [], []
    for n in sizes:
        elapsed, graph, initial = time_abm_step(model, n, steps, trials, config, seed)
        per_step.append(elapsed)
        gmp_per_step.append(time_gmp_step(graph, initial, trials, seed) if include_gmp else None)
        logging.info(f"{model} n={n}: {elapsed:.4f}s per step"
                     + (f", GMP {gmp_per_step[-1]:.4f}s" if include_gmp else ""))

    doubled, _, _ = time_abm_step(model, 2 * sizes[0], steps, trials, config, seed)
    if len(sizes) > 1:
        slope, intercept = np.polyfit(np.array(sizes, dtype=np.float64), np.array(per_step), 1)
    else:
        slope, intercept = per_step[0] / sizes[0], 0.0
    extrapolated = (slope * BENCH_EXTRAPOLATE_AGENTS + intercept) * BENCH_EXTRAPOLATE_STEPS

    report = {
        "model": model,
        "steps": int(steps),
        "trials": int(trials),
        "sizes": sizes,
        "seconds_per_step": per_step,
        "seconds_per_agent_step": [t / n for t, n in zip(per_step, sizes)],
        "linear_fit": {"slope": float(slope), "intercept": float(intercept)},
        "doubling_ratio": float(doubled / per_step[0]) if per_step[0] > 0 else float("nan"),
        "extrapolation": {
            "agents": BENCH_EXTRAPOLATE_AGENTS,
            "steps": BENCH_EXTRAPOLATE_STEPS,
            "seconds": float(extrapolated),
            "hours": float(extrapolated / 3600.0)
        },
        "gmp_seconds_per_step": gmp_per_step,
        "speedup_vs_gmp": [a / g if g else None for a, g in zip(per_step, gmp_per_step)]
    }

    log_summary("Benchmark Summary", {
        "Model": model,
        "Sizes": sizes,
        "Doubling ratio": f"{report['doubling_ratio']:.2f}",
        f"Extrapolated {BENCH_EXTRAPOLATE_AGENTS} agents x {BENCH_EXTRAPOLATE_STEPS} steps":
            f"{report['extrapolation']['hours']:.2f} h",
        "Speed-up vs GMP": report["speedup_vs_gmp"]
    })
    return report
