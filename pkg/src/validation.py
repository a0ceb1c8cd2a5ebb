import logging

import duckdb
import numpy as np
import pandas as pd

from src.constants import DATASET_SCHEMA, DEFAULT_T_MAX, OPINION_MAX, OPINION_MIN


class ValidationHandler:
    def __init__(self, t_max=DEFAULT_T_MAX):
        self.t_max = t_max
        self.expected_schema = dict(DATASET_SCHEMA)
        self.opinion_range = (OPINION_MIN, OPINION_MAX)

    def read_raw_frame(self, file_path):
        """
        Load the dataset file without coercion so malformed values survive into the report.
        """
        df = pd.read_json(file_path, lines=True, dtype=False, convert_dates=False)
        for column in self.expected_schema:
            if column not in df.columns:
                df[column] = None
        return df

    def validate_schema_and_types(self, df: pd.DataFrame):
        """
        Count missing values per field and values that do not cast to the field's type.
        """
        con = duckdb.connect()
        errors = []

        try:
            con.register("df", df)
            missing_cols = ",\n".join(f"COUNT(*) - COUNT({column}) AS missing_{column}"
                                      for column in self.expected_schema)
            missing_summary = con.execute(f"SELECT COUNT(*) AS total,\n{missing_cols}\nFROM df").fetchdf()

            for column, expected_type in self.expected_schema.items():
                target = "TIMESTAMPTZ" if expected_type == "TIMESTAMP" else expected_type
                bad = con.execute(f"""
                    SELECT COUNT({column}) - COUNT(TRY_CAST({column} AS {target})) FROM df
                """).fetchone()[0]
                if bad:
                    errors.append(f"Column '{column}' has {bad} values that are not {expected_type}")

            con.unregister("df")
            return {
                "missing_summary": missing_summary,
                "type_errors": errors
            }

        except Exception as e:
            logging.error(f"Schema validation failed: {e}")
            return {
                "missing_summary": pd.DataFrame(),
                "type_errors": [str(e)]
            }

    def check_opinion_range(self, df: pd.DataFrame):
        con = duckdb.connect()
        con.register("df", df)
        low, high = self.opinion_range
        result = con.execute(f"""
            SELECT
                COUNT(TRY_CAST(opinion_value AS DOUBLE)) AS total,
                SUM(CASE WHEN TRY_CAST(opinion_value AS DOUBLE) < {low}
                          OR TRY_CAST(opinion_value AS DOUBLE) > {high} THEN 1 ELSE 0 END) AS out_of_range,
                MIN(TRY_CAST(opinion_value AS DOUBLE)) AS min_opinion,
                MAX(TRY_CAST(opinion_value AS DOUBLE)) AS max_opinion
            FROM df
        """).fetchdf()
        con.unregister("df")
        result["out_of_range"] = result["out_of_range"].fillna(0).astype(np.int64)
        return result

    def window_coverage(self, df: pd.DataFrame):
        """
        Records and mean opinion per equal-width posting-time window, empty windows included.
        """
        con = duckdb.connect()
        con.register("df", df)

        try:
            result = con.execute(f"""
                WITH parsed AS (
                    SELECT
                        epoch(TRY_CAST(posting_time AS TIMESTAMPTZ)) AS ts,
                        TRY_CAST(opinion_value AS DOUBLE) AS opinion
                    FROM df
                ),
                valid AS (
                    SELECT * FROM parsed WHERE ts IS NOT NULL
                ),
                bounds AS (
                    SELECT MIN(ts) AS lo, MAX(ts) - MIN(ts) AS span FROM valid
                )
                SELECT
                    CASE
                        WHEN span = 0 THEN 0
                        ELSE LEAST(CAST(FLOOR((ts - lo) / span * {self.t_max}) AS BIGINT), {self.t_max - 1})
                    END AS bucket,
                    COUNT(*) AS n_records,
                    ROUND(AVG(opinion), 4) AS mean_opinion
                FROM valid, bounds
                GROUP BY bucket
                ORDER BY bucket
            """).fetchdf()
            con.unregister("df")
        except Exception as e:
            logging.error(f"Window coverage failed: {e}")
            return pd.DataFrame()

        coverage = pd.DataFrame({"bucket": np.arange(self.t_max)}).merge(result, on="bucket", how="left")
        coverage["n_records"] = coverage["n_records"].fillna(0).astype(np.int64)
        coverage["empty"] = coverage["n_records"] == 0
        return coverage.rename(columns={"bucket": "window"})

    def profile_posts_per_user(self, df: pd.DataFrame):
        con = duckdb.connect()
        con.register("df", df)

        result = con.execute("""
            WITH per_user AS (
                SELECT user_id, COUNT(*) AS posts
                FROM df
                WHERE user_id IS NOT NULL
                GROUP BY user_id
            )
            SELECT
                COUNT(*) AS users,
                MIN(posts) AS min_posts,
                MEDIAN(posts) AS median_posts,
                ROUND(AVG(posts), 2) AS mean_posts,
                MAX(posts) AS max_posts,
                SUM(CASE WHEN posts = 1 THEN 1 ELSE 0 END) AS single_post_users
            FROM per_user
        """).fetchdf()

        con.unregister("df")
        return result

    def run_validations(self, df: pd.DataFrame, output_path="data_quality_report.csv"):
        logging.info("Running data quality validations")

        schema_check = self.validate_schema_and_types(df)
        range_check = self.check_opinion_range(df)
        coverage = self.window_coverage(df)
        posts_profile = self.profile_posts_per_user(df)

        with open(output_path, "w") as f:
            f.write("=== SCHEMA VALIDATION: MISSING VALUES ===\n")
            if not schema_check["missing_summary"].empty:
                schema_check["missing_summary"].to_csv(f, index=False)
            else:
                f.write("Failed to compute missing summary.\n")

            f.write("\n\n=== SCHEMA VALIDATION: TYPE CHECKS ===\n")
            if schema_check["type_errors"]:
                for error in schema_check["type_errors"]:
                    f.write(f"{error}\n")
            else:
                f.write("All column types match expected schema.\n")

            f.write("\n\n=== OPINION RANGE CHECK ===\n")
            range_check.to_csv(f, index=False)

            f.write(f"\n\n=== WINDOW COVERAGE (t_max={self.t_max}) ===\n")
            coverage.to_csv(f, index=False)

            f.write("\n\n=== POSTS PER USER ===\n")
            posts_profile.to_csv(f, index=False)

        logging.info(f"Data quality report saved to: {output_path}")
        return {
            "schema": schema_check,
            "opinion_range": range_check,
            "window_coverage": coverage,
            "posts_per_user": posts_profile
        }
