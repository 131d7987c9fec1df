import json
import logging
import math
import os
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

REPORT_DIGITS = 12


def truncate_filename(filename, max_length=125):
    """Truncate filename to max_length to ensure the filename won't exceed the file system limit.

    Args:
        filename: str
        max_length: int, default to 125 (usual path length limit is 255 chars)
    """

    if len(filename) > max_length:
        truncated_filename = filename[:max_length]
        logger.warning(
            f"Filename is too long. Filename is truncated to {truncated_filename}."
        )
        return truncated_filename

    return filename


def makeStringRed(message):
    return f"\033[91m {message}\033[00m"


def round_floats(obj: Any, digits: int = REPORT_DIGITS) -> Any:
    """Recursively convert numpy scalars/arrays to plain Python and round floats.

    Reports written through this helper print identically for identical runs.
    """
    if isinstance(obj, dict):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value) or math.isinf(value):
            return str(value)
        if value == 0.0:
            return 0.0
        return float(f"{value:.{digits}g}")
    return obj


class FileIOHelper:
    @staticmethod
    def dump_json(obj, file_name, encoding="utf-8", deterministic=False):
        if deterministic:
            obj = round_floats(obj)
        with open(file_name, "w", encoding=encoding) as fw:
            json.dump(
                obj,
                fw,
                indent=2,
                sort_keys=deterministic,
                default=FileIOHelper.handle_non_serializable,
            )
            fw.write("\n")

    @staticmethod
    def handle_non_serializable(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        return "non-serializable contents"  # mark the non-serializable part

    @staticmethod
    def load_json(file_name, encoding="utf-8"):
        with open(file_name, "r", encoding=encoding) as fr:
            return json.load(fr)

    @staticmethod
    def write_str(s, path):
        with open(path, "w") as f:
            f.write(s)

    @staticmethod
    def load_str(path):
        with open(path, "r") as f:
            return f.read()

    @staticmethod
    def ensure_parent(path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        return path
