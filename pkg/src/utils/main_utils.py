import os
import sys
import json
import dill
import yaml
import struct
import hashlib
import numpy as np
import pandas as pd
from typing import List, Tuple

from src.logger import logging
from src.exception import CustomException, ConfigError
from src.constants import (PACKAGE_VERSION, RESULT_TABLE_FLOAT_FORMAT, RESULT_METADATA_SUFFIX,
                           TRAJECTORY_MAGIC, TRAJECTORY_FORMAT_VERSION)


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_yaml_file(file_path: str) -> dict:
    """
    Read and parse a YAML file, resolving its `include:` list.

    Included files are read first (paths relative to the including file, nested
    includes allowed) and deep-merged in order; the including file's own keys
    win over anything included.

    Parameters
    ----------
    file_path : str
        Absolute or relative path to the YAML file.

    Returns
    -------
    dict
        Parsed and merged YAML content as a dictionary.
    """
    try:
        with open(file_path, 'rb') as f:
            content = yaml.safe_load(f) or {}
        if not isinstance(content, dict):
            raise ConfigError(f"{file_path} does not contain a mapping at top level")

        includes = content.pop("include", []) or []
        if isinstance(includes, str):
            includes = [includes]

        merged = {}
        base_dir = os.path.dirname(os.path.abspath(file_path))
        for include in includes:
            include_path = include if os.path.isabs(include) else os.path.join(base_dir, include)
            logging.debug(f"including {include_path} into {file_path}")
            merged = _merge(merged, read_yaml_file(include_path))

        return _merge(merged, content)
    except CustomException:
        raise
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {e.filename}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {file_path}: {e}") from e
    except Exception as e:
        raise CustomException(e, sys) from e


def config_hash(config: dict, seed: int) -> str:
    """SHA-256 of the canonical YAML dump of `config` plus the seed."""
    canonical = yaml.safe_dump(config, sort_keys= True, default_flow_style= False)
    return hashlib.sha256(f"{canonical}\nseed={seed}".encode("utf-8")).hexdigest()


def save_object(file_path: str, object: object) -> None:
    """
    Serialize a Python object using dill and save it to a file.

    Parameters
    ----------
    file_path : str
        Destination file path where the object will be stored.
    object : object
        Any Python object that supports dill serialization.
    """
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok= True)
        with open(file_path, 'wb') as f:
            dill.dump(object, f)
    except Exception as e:
        raise CustomException(e, sys) from e


def load_object(file_path: str) -> object:
    """
    Load and deserialize a Python object stored using dill.

    Parameters
    ----------
    file_path : str
        Path to the serialized object file.

    Returns
    -------
    object
        Deserialized Python object.
    """
    try:
        with open(file_path, 'rb') as f:
            return dill.load(f)
    except Exception as e:
        raise CustomException(e, sys) from e


def write_result_table(table, out_dir: str, config_digest: str, wall_time: float) -> Tuple[str, str]:
    """
    Write a ResultTable as CSV plus a `<name>.meta.json` sidecar.

    Parameters
    ----------
    table : ResultTable
        The table to emit; its rows must not contain NaN (failures are status rows).
    out_dir : str
        Output directory, created if missing.
    config_digest : str
        Config hash recorded in the sidecar.
    wall_time : float
        Seconds spent producing the table.

    Returns
    -------
    tuple of str
        Paths of the CSV file and of the sidecar.
    """
    try:
        os.makedirs(out_dir, exist_ok= True)
        csv_path = os.path.join(out_dir, f"{table.name}.csv")
        meta_path = os.path.join(out_dir, f"{table.name}{RESULT_METADATA_SUFFIX}")

        frame = table.to_dataframe()
        frame.to_csv(csv_path, index= False, float_format= RESULT_TABLE_FLOAT_FORMAT)

        metadata = {
            "name": table.name,
            "schema": [column.to_dict() for column in table.columns],
            "config_hash": config_digest,
            "code_version": PACKAGE_VERSION,
            "wall_time_seconds": wall_time,
        }
        metadata.update(table.metadata)
        with open(meta_path, "w") as f:
            json.dump(metadata, f, indent= 2, sort_keys= True, default= str)

        logging.info(f"wrote {len(frame)} rows to {csv_path}")
        return csv_path, meta_path
    except Exception as e:
        raise CustomException(e, sys) from e


def read_result_table(csv_path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(csv_path)
    except Exception as e:
        raise CustomException(e, sys) from e


def write_trajectory_binary(file_path: str, times, states, stride: int) -> None:
    """
    Stream trajectory snapshots to a little-endian binary file.

    Layout: magic b"IFSM", u32 version, u32 state length N, u32 stride, then
    one frame per snapshot made of a f64 time followed by N f64 values.
    """
    try:
        states = [np.asarray(s, dtype= "<f8") for s in states]
        length = states[0].size if states else 0
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok= True)
        with open(file_path, "wb") as f:
            f.write(TRAJECTORY_MAGIC)
            f.write(struct.pack("<III", TRAJECTORY_FORMAT_VERSION, length, stride))
            for t, state in zip(times, states):
                if state.size != length:
                    raise ValueError(f"snapshot of length {state.size} in a trajectory of length {length}")
                f.write(struct.pack("<d", float(t)))
                f.write(state.tobytes())
        logging.info(f"wrote {len(states)} snapshots of length {length} to {file_path}")
    except Exception as e:
        raise CustomException(e, sys) from e


def read_trajectory_binary(file_path: str) -> Tuple[np.ndarray, List[np.ndarray], int]:
    """Read a file written by `write_trajectory_binary`; returns (times, states, stride)."""
    try:
        with open(file_path, "rb") as f:
            payload = f.read()
        if payload[:4] != TRAJECTORY_MAGIC:
            raise ValueError(f"{file_path} is not a trajectory file")
        version, length, stride = struct.unpack("<III", payload[4:16])
        if version != TRAJECTORY_FORMAT_VERSION:
            raise ValueError(f"unsupported trajectory format version {version}")

        frames = np.frombuffer(payload[16:], dtype= "<f8").reshape(-1, length + 1)
        return frames[:, 0].copy(), [row[1:].copy() for row in frames], stride
    except Exception as e:
        raise CustomException(e, sys) from e
