import os
import json
import logging
from datetime import datetime
from typing import Dict, Any
from pathlib import Path

import numpy as np
import pandas as pd

from config import CSV_SCHEMA_HEADER

# Configure logging
logger = logging.getLogger(__name__)


def get_timestamp() -> str:
    """Return a formatted timestamp string for run naming and tracking"""
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def save_json_data(data: Dict[str, Any], directory: str, filename: str) -> str:
    """Save JSON data to a file, creating the directory if needed

    Args:
        data: The data to save as JSON
        directory: The directory path to save to
        filename: The filename to use

    Returns:
        The full output path where the file was saved
    """
    os.makedirs(directory, exist_ok=True)
    output_path = os.path.join(directory, filename)

    data_serializable = _to_serializable(data)

    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(data_serializable, f, indent=2, sort_keys=True)
    logger.info(f"Saved data to {output_path}")
    return output_path


def _to_serializable(data: Any) -> Any:
    """Recursively convert Path objects and numpy values to JSON types

    Non-finite floats become strings so the output stays strict JSON.
    """
    if isinstance(data, Path):
        return str(data)
    if isinstance(data, dict):
        return {str(k): _to_serializable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_to_serializable(item) for item in data]
    if isinstance(data, np.ndarray):
        return _to_serializable(data.tolist())
    if isinstance(data, np.generic):
        data = data.item()
    if isinstance(data, float) and not np.isfinite(data):
        return str(data)
    return data


def ensure_output_directory(directory: str) -> str:
    """Create the run output directory"""
    os.makedirs(directory, exist_ok=True)
    logger.info(f"Ensured directory exists: {directory}")
    return directory


def write_metrics_csv(frame: pd.DataFrame, directory: str, filename: str) -> str:
    """Write a metrics table under the versioned schema header comment

    Args:
        frame: One row per record
        directory: Output directory
        filename: CSV file name

    Returns:
        The full output path
    """
    os.makedirs(directory, exist_ok=True)
    output_path = os.path.join(directory, filename)
    with open(output_path, "w", encoding="utf-8", newline="") as f:
        f.write(CSV_SCHEMA_HEADER + "\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    logger.info(f"Saved {len(frame)} metric rows to {output_path}")
    return output_path


def read_metrics_csv(path: str) -> pd.DataFrame:
    """Read a metrics CSV written by write_metrics_csv"""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != CSV_SCHEMA_HEADER:
            raise ValueError(f"{path}: unexpected schema header '{header}'")
        return pd.read_csv(f)
