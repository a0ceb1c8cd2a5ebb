import json
import logging
import os
import struct
from dataclasses import asdict

import numpy as np

from src.config import GmpConfig
from src.gmp import GmpParams

MAGIC = b"GMPCKPT\0"
VERSION = 1
PREFIX = struct.Struct("<8sII")
FLOAT_BYTES = 8


class CheckpointError(ValueError):
    pass


class CheckpointUtils:
    """
    GMP parameter container:

        magic     8 bytes   b"GMPCKPT\\0"
        version   uint32 LE
        header    uint32 LE length, then UTF-8 JSON
                  {"config": {...GmpConfig...},
                   "tensors": [{"name", "shape", "offset"}, ...]}
        payload   float64 LE tensors back to back, offsets in bytes from payload start
    """

    @staticmethod
    def save_params(params, file_path):
        tensors, offset = [], 0
        for name in params.names:
            value = params[name]
            tensors.append({"name": name, "shape": list(value.shape), "offset": offset})
            offset += value.size * FLOAT_BYTES

        header = json.dumps({"config": asdict(params.config), "tensors": tensors}, sort_keys=True).encode("utf-8")
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(file_path, "wb") as file:
            file.write(PREFIX.pack(MAGIC, VERSION, len(header)))
            file.write(header)
            for name in params.names:
                file.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())

        logging.info(f"Saved {params.n_parameters} GMP parameters to {file_path}")

    @staticmethod
    def read_header(file_path):
        with open(file_path, "rb") as file:
            prefix = file.read(PREFIX.size)
            if len(prefix) < PREFIX.size:
                raise CheckpointError(f"{file_path}: truncated checkpoint prefix")
            magic, version, header_len = PREFIX.unpack(prefix)
            if magic != MAGIC:
                raise CheckpointError(f"{file_path}: not a GMP checkpoint")
            if version != VERSION:
                raise CheckpointError(f"{file_path}: unsupported checkpoint version {version}")
            raw = file.read(header_len)
            if len(raw) < header_len:
                raise CheckpointError(f"{file_path}: truncated checkpoint header")
            try:
                header = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise CheckpointError(f"{file_path}: unreadable header: {e}")
            return header, PREFIX.size + header_len

    @staticmethod
    def load_params(file_path):
        if not os.path.exists(file_path):
            raise CheckpointError(f"Checkpoint not found: {file_path}")

        header, payload_start = CheckpointUtils.read_header(file_path)
        try:
            config = GmpConfig(**header["config"]).validate()
        except (TypeError, ValueError) as e:
            raise CheckpointError(f"{file_path}: invalid GMP config in header: {e}")

        with open(file_path, "rb") as file:
            file.seek(payload_start)
            payload = file.read()

        tensors = {}
        for entry in header.get("tensors", []):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            start, end = entry["offset"], entry["offset"] + count * FLOAT_BYTES
            if end > len(payload):
                raise CheckpointError(f"{file_path}: tensor {entry['name']} runs past the payload")
            tensors[entry["name"]] = np.frombuffer(payload[start:end], dtype="<f8").astype(np.float64).reshape(shape)

        try:
            params = GmpParams(tensors, config)
        except ValueError as e:
            raise CheckpointError(f"{file_path}: {e}")
        logging.info(f"Loaded {params.n_parameters} GMP parameters from {file_path}")
        return params
