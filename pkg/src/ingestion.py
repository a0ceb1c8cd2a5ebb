import csv
import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime

import duckdb
import numpy as np
import pandas as pd
from dateutil import parser as date_parser
from dateutil import tz

from src.constants import OPINION_MAX, OPINION_MIN
from src.utils import log_pretty, log_summary

DATASET_SUFFIXES = (".jsonl", ".ndjson", ".json")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    user_id: str
    user_description: str
    follower_count: int
    following_count: int
    tweet_content: str
    posting_time: datetime
    opinion_value: float

    def to_json(self):
        return {
            "user_id": self.user_id,
            "user_description": self.user_description,
            "follower_count": self.follower_count,
            "following_count": self.following_count,
            "tweet_content": self.tweet_content,
            "posting_time": self.posting_time.isoformat(),
            "opinion_value": self.opinion_value
        }


@dataclass(frozen=True)
class Dataset:
    records: list
    windows: np.ndarray
    truth: np.ndarray
    t_max: int

    @property
    def user_ids(self):
        return list(dict.fromkeys(record.user_id for record in self.records))

    def profiles(self):
        """
        Latest description and follow counts per user, keyed by user id in first-seen order.
        """
        profiles = {}
        for record in self.records:
            profiles[record.user_id] = record
        return {user_id: profiles[user_id] for user_id in self.user_ids}

    def observations(self, max_window=None):
        observed = defaultdict(list)
        for record, window in zip(self.records, self.windows):
            if max_window is None or window < max_window:
                observed[record.user_id].append((int(window), record.opinion_value))
        return dict(observed)


def decoded_lines(file_path):
    """
    Yield (line number, text) pairs, decoding each line as UTF-8 on its own.
    """
    with open(file_path, "rb") as file:
        for line_number, raw in enumerate(file, start=1):
            try:
                yield line_number, raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise DatasetError(f"Line {line_number}: invalid UTF-8 ({e.reason})")


def normalize_timestamp(value):
    parsed = value if isinstance(value, datetime) else date_parser.isoparse(str(value))
    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=tz.UTC)
    return parsed.astimezone(tz.UTC)


class IngestionHandler:

    def validate_file_path(self, file_path):
        if not file_path:
            logging.error("File path is empty.")
            return False
        if not os.path.exists(file_path):
            logging.error(f"File does not exist: {file_path}")
            return False
        if not file_path.endswith(DATASET_SUFFIXES):
            logging.error(f"File is not a line-delimited JSON dataset: {file_path}")
            return False
        return True

    def parse_record(self, line, line_number):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"Line {line_number}: malformed JSON ({e.msg})")
        if not isinstance(raw, dict):
            raise DatasetError(f"Line {line_number}: expected an object, got {type(raw).__name__}")

        missing = [key for key in ("user_id", "posting_time", "opinion_value") if raw.get(key) is None]
        if missing:
            raise DatasetError(f"Line {line_number}: missing required fields {missing}")

        user_id = str(raw["user_id"]).strip()
        if not user_id:
            raise DatasetError(f"Line {line_number}: user_id is empty")

        try:
            posting_time = normalize_timestamp(raw["posting_time"])
        except (ValueError, OverflowError) as e:
            raise DatasetError(f"Line {line_number}: unparseable posting_time {raw['posting_time']!r} ({e})")

        try:
            opinion = float(raw["opinion_value"])
            followers = int(raw.get("follower_count") or 0)
            following = int(raw.get("following_count") or 0)
        except (TypeError, ValueError) as e:
            raise DatasetError(f"Line {line_number}: non-numeric field ({e})")

        if not OPINION_MIN <= opinion <= OPINION_MAX:
            raise DatasetError(f"Line {line_number}: opinion_value {opinion} outside [-1, 1]")
        if followers < 0 or following < 0:
            raise DatasetError(f"Line {line_number}: negative follow counts")

        return DatasetRecord(
            user_id=user_id,
            user_description=str(raw.get("user_description") or ""),
            follower_count=followers,
            following_count=following,
            tweet_content=str(raw.get("tweet_content") or ""),
            posting_time=posting_time,
            opinion_value=opinion
        )

    def read_records(self, file_path):
        records = []
        for line_number, line in decoded_lines(file_path):
            if line.strip():
                records.append(self.parse_record(line, line_number))
        return records

    def bucket_windows(self, records, t_max):
        """
        Assign each record to one of t_max equal-width posting-time windows and
        average opinions per window. Empty windows are filled by linear
        interpolation between the nearest non-empty ones.
        """
        if t_max < 1:
            raise ValueError(f"t_max must be positive, got {t_max}")

        df = pd.DataFrame({
            "row_id": np.arange(len(records)),
            "ts": [record.posting_time.timestamp() for record in records],
            "opinion": [record.opinion_value for record in records]
        })

        con = duckdb.connect()
        con.register("records", df)
        assigned = con.execute(f"""
            WITH bounds AS (
                SELECT MIN(ts) AS lo, MAX(ts) - MIN(ts) AS span FROM records
            )
            SELECT
                row_id,
                opinion,
                CASE
                    WHEN span = 0 THEN 0
                    ELSE LEAST(CAST(FLOOR((ts - lo) / span * {t_max}) AS BIGINT), {t_max - 1})
                END AS bucket
            FROM records, bounds
            ORDER BY row_id
        """).fetchdf()
        con.register("assigned", assigned)
        means = con.execute("""
            SELECT bucket, AVG(opinion) AS mean_opinion, COUNT(*) AS n_records
            FROM assigned
            GROUP BY bucket
            ORDER BY bucket
        """).fetchdf()
        con.unregister("assigned")
        con.unregister("records")

        windows = assigned["bucket"].to_numpy(dtype=np.int64)
        observed = means["bucket"].to_numpy(dtype=np.int64)
        truth = np.interp(np.arange(t_max), observed, means["mean_opinion"].to_numpy(dtype=np.float64))

        filled = t_max - observed.size
        if filled:
            logging.info(f"Interpolated {filled} empty windows out of {t_max}")
        return windows, truth

    def load_dataset(self, file_path, t_max):
        if not self.validate_file_path(file_path):
            raise DatasetError(f"Invalid dataset path: {file_path}")

        records = self.read_records(file_path)
        if not records:
            raise DatasetError(f"No valid records in {file_path}")

        windows, truth = self.bucket_windows(records, t_max)
        dataset = Dataset(records, windows, truth, t_max)

        log_summary("Ingestion Summary", {
            "File": file_path,
            "Records ingested": len(records),
            "Distinct users": len(dataset.user_ids),
            "Windows": t_max,
            "Non-empty windows": int(np.unique(windows).size),
            "Truth curve range": f"[{truth.min():.4f}, {truth.max():.4f}]"
        })
        return dataset

    def write_dataset(self, records, file_path):
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as file:
            for record in records:
                file.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
        logging.info(f"Wrote {len(records)} records to {file_path}")

    def inspect_file_schema(self, file_path):
        if not self.validate_file_path(file_path):
            return None

        try:
            con = duckdb.connect()
            schema = con.execute(f"DESCRIBE SELECT * FROM read_json_auto('{file_path}')").fetchall()
            logging.info(f"File Inspection for {file_path}:")
            log_pretty(schema)
            return schema
        except Exception as e:
            logging.error(f"Failed to inspect file schema: {file_path}, Error: {e}")
            return None


def read_memory_dump(file_path):
    """
    Memory dump rows: id, opinion, content, then the content embedding as comma-separated reals.
    """
    rows = []
    lines = (line for _, line in decoded_lines(file_path))
    for line_number, row in enumerate(csv.reader(lines), start=1):
        if not row:
            continue
        if len(row) < 4:
            raise DatasetError(f"Line {line_number}: expected id, opinion, content and an embedding")
        try:
            rows.append((int(row[0]), float(row[1]), row[2], np.array(row[3:], dtype=np.float64)))
        except ValueError as e:
            raise DatasetError(f"Line {line_number}: {e}")
    return rows


def read_vector(file_path):
    with open(file_path, "r", encoding="utf-8") as file:
        tokens = file.read().replace(",", " ").split()
    if not tokens:
        raise DatasetError(f"No values in {file_path}")
    return np.array(tokens, dtype=np.float64)


def read_curve(file_path):
    values = np.loadtxt(file_path, dtype=np.float64, ndmin=1)
    if values.size == 0:
        raise DatasetError(f"Empty curve file: {file_path}")
    return values
