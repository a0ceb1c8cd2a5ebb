import logging
import os

import numpy as np
import pandas as pd
import yaml

from src.constants import COMPRESSION_ALGO, PERCENTILE_BANDS
from src.utils import ensure_dir


def _plain(value):
    """
    Convert numpy scalars and arrays into YAML-safe builtins.
    """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


class DataLoader:
    """
    Writes simulation artefacts: trend text, the YAML report, the centrality
    table and the opinion history as partitioned Parquet.
    """

    def __init__(self, output_path):
        self.output_path = output_path

    def _path(self, name):
        ensure_dir(self.output_path)
        return os.path.join(self.output_path, name)

    def write_trend(self, trend, name="trend.txt"):
        path = self._path(name)
        values = np.asarray(getattr(trend, "values", trend), dtype=np.float64)
        with open(path, "w") as file:
            for value in values:
                file.write(f"{value!r}\n")
        logging.info(f"Trend curve ({values.size} steps) saved to {path}")
        return path

    def write_yaml(self, data, name):
        path = self._path(name)
        with open(path, "w", encoding="utf-8") as file:
            yaml.safe_dump(_plain(data), file, sort_keys=False, allow_unicode=True)
        logging.info(f"Report saved to {path}")
        return path

    def write_centrality(self, centrality_table, name="centrality.csv"):
        path = self._path(name)
        columns = ["step", *PERCENTILE_BANDS, "top20_share"]
        pd.DataFrame(centrality_table["rounds"], columns=columns).to_csv(path, index=False)
        logging.info(f"Centrality table saved to {path}")
        return path

    def history_frame(self, history, core_mask=None):
        history = np.asarray(history, dtype=np.float64)
        n_agents, n_steps = history.shape
        if core_mask is None:
            core_mask = np.zeros_like(history, dtype=bool)
        return pd.DataFrame({
            "agent_id": np.repeat(np.arange(n_agents), n_steps),
            "step": np.tile(np.arange(n_steps), n_agents),
            "opinion": history.ravel(),
            "is_core": np.asarray(core_mask, dtype=bool).ravel()
        })

    def save_history_parquet(self, history, core_mask=None, name="history"):
        df = self.history_frame(history, core_mask)
        if df.empty:
            raise ValueError("Opinion history is empty. Cannot write output.")

        path = self._path(name)
        df.to_parquet(
            path,
            engine="pyarrow",
            index=False,
            partition_cols=["step"],
            compression=COMPRESSION_ALGO
        )
        logging.info(f"Opinion history saved to {path} (partitioned by step)")
        return path

    def save_simulation(self, report):
        logging.info("Running output writing")
        paths = {
            "trend": self.write_trend(report.trend),
            "report": self.write_yaml(report.to_dict(), "report.yaml"),
            "centrality": self.write_centrality(report.centrality_table)
        }
        if report.history is not None:
            paths["history"] = self.save_history_parquet(report.history, report.core_mask)
        return paths


def load_history_parquet(path):
    df = pd.read_parquet(path, engine="pyarrow")
    df["step"] = df["step"].astype(np.int64)
    df = df.sort_values(["agent_id", "step"])
    return df.pivot(index="agent_id", columns="step", values="opinion").to_numpy()
