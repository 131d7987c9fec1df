"""
Result Manager module for periodic_hyperbolic.
This module provides a unified interface for storing and retrieving the artifacts
of a run (JSON reports, text summaries and grid functions as CSV).
"""

import json
import logging
import os
import shutil
from typing import Dict, List, Optional, Union

from .dataclass import GridFunction
from .errors import ProblemFormatError
from .utils import FileIOHelper, truncate_filename

logger = logging.getLogger(__name__)


class ResultManager:
    """
    Class for managing run results in a local directory tree, one directory per run.
    """

    def __init__(self, base_dir: str = "./results", deterministic: bool = True):
        """
        Initialize the ResultManager.

        Args:
            base_dir (str): Base directory for local storage
            deterministic (bool): Round floats and sort keys in JSON reports
        """
        self.base_dir = base_dir
        self.deterministic = deterministic
        os.makedirs(base_dir, exist_ok=True)

    def get_run_dir(self, run_name: str) -> str:
        safe_name = truncate_filename(run_name.replace(" ", "_").replace("/", "_").replace("\\", "_"))
        return os.path.join(self.base_dir, safe_name)

    def list_runs(self) -> List[str]:
        if not os.path.exists(self.base_dir):
            return []
        return sorted(
            d for d in os.listdir(self.base_dir) if os.path.isdir(os.path.join(self.base_dir, d))
        )

    def result_path(self, run_name: str, file_name: str) -> str:
        run_dir = self.get_run_dir(run_name)
        os.makedirs(run_dir, exist_ok=True)
        return os.path.join(run_dir, file_name)

    def save_result(self, run_name: str, result_type: str, data: Union[Dict, List, str]) -> str:
        """
        Save a result file for a run.

        Args:
            run_name (str): Run directory name
            result_type (str): Type of result (e.g., 'resonance', 'kernel')
            data (Union[Dict, List, str]): dicts and lists go to <result_type>.json, text to .txt

        Returns:
            str: Path of the written file
        """
        if isinstance(data, (dict, list)):
            path = self.result_path(run_name, f"{result_type}.json")
            FileIOHelper.dump_json(data, path, deterministic=self.deterministic)
        else:
            path = self.result_path(run_name, f"{result_type}.txt")
            FileIOHelper.write_str(str(data), path)
        logger.debug(f"saved {result_type} of run {run_name} to {path}")
        return path

    def save_grid_function(self, run_name: str, result_type: str, u: GridFunction) -> str:
        """Write <result_type>.csv with its <result_type>.json shape sidecar."""
        path = self.result_path(run_name, f"{result_type}.csv")
        u.to_csv(path)
        return path

    def get_result(
        self, run_name: str, result_type: str, as_json: bool = True
    ) -> Optional[Union[Dict, List, str]]:
        """
        Get a result file for a run, trying <result_type>.json first, then .txt.

        Returns None if neither exists.
        """
        run_dir = self.get_run_dir(run_name)
        json_path = os.path.join(run_dir, f"{result_type}.json")
        if os.path.exists(json_path):
            content = FileIOHelper.load_str(json_path)
            if not as_json:
                return content
            try:
                return json.loads(content)
            except json.JSONDecodeError as err:
                raise ProblemFormatError(f"{json_path}:{err.lineno}:{err.colno}: {err.msg}") from err
        txt_path = os.path.join(run_dir, f"{result_type}.txt")
        if os.path.exists(txt_path):
            return FileIOHelper.load_str(txt_path)
        return None

    def get_grid_function(self, run_name: str, result_type: str) -> Optional[GridFunction]:
        path = os.path.join(self.get_run_dir(run_name), f"{result_type}.csv")
        if not os.path.exists(path):
            return None
        return GridFunction.from_csv(path)

    def delete_run_results(self, run_name: str) -> bool:
        run_dir = self.get_run_dir(run_name)
        if not os.path.exists(run_dir):
            return False
        try:
            shutil.rmtree(run_dir)
        except OSError as e:
            logger.error(f"Error deleting run directory {run_dir}: {str(e)}")
            return False
        return True
