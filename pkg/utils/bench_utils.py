import logging
import statistics
import time
from typing import List, Sequence

import numpy as np
import pandas as pd

from core import structured
from utils.config_utils import StructureSpec

logger = logging.getLogger(__name__)


def time_congruence(structure_text: str, dim: int, repeats: int = 5, seed: int = 0) -> float:
    """Median wall time in milliseconds of one K^T U K on a random member"""
    rng = np.random.default_rng(seed)
    structure = StructureSpec.model_validate(structure_text).bind(dim)
    k = structured.add(
        structured.identity(structure),
        structured.StructuredFactor(structure, 0.01 * rng.normal(size=structured.storage_count(structure))),
    )
    u = rng.normal(size=(dim, dim))
    u = 0.5 * (u + u.T)

    timings: List[float] = []
    for _ in range(repeats):
        start = time.perf_counter()
        structured.congruence(k, u)
        timings.append(1000.0 * (time.perf_counter() - start))
    return statistics.median(timings)


def bench_congruence(structure_text: str, dims: Sequence[int], repeats: int = 5) -> pd.DataFrame:
    """Congruence timings over increasing dimensions

    Returns:
        DataFrame with structure, dim, storage, median_ms and the ratio of
        each median to the previous dimension's
    """
    spec = StructureSpec.model_validate(structure_text)
    rows = []
    previous = None
    for dim in sorted(dims):
        median_ms = time_congruence(structure_text, dim, repeats)
        rows.append(
            {
                "structure": spec.label(),
                "dim": dim,
                "storage": structured.storage_count(spec.bind(dim)),
                "median_ms": round(median_ms, 4),
                "ratio": round(median_ms / previous, 3) if previous else float("nan"),
            }
        )
        previous = median_ms
        logger.debug(f"Benchmarked {spec.label()} at d={dim}: {median_ms:.4f} ms")
    return pd.DataFrame(rows)
