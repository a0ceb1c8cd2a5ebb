import logging
import os
import pprint


def log_pretty(data, indent=4, width=80):
    pp = pprint.PrettyPrinter(indent=indent, width=width, compact=False)
    logging.info(pp.pformat(data))


def log_summary(title, items):
    logging.info(f"{title}:")
    for key, value in items.items():
        logging.info(f"     - {key}: {value}")


def ensure_dir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def mean_or_zero(values):
    values = list(values)
    if not values:
        return 0.0
    return float(sum(values) / len(values))
