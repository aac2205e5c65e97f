import dataclasses
import logging
import math
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from models.mlp import accuracy
from models.tasks import relative_distance_to_optimum
from optimizers.state import factor_norms

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "step",
    "train_loss",
    "test_error",
    "grad_norm",
    "factor_norm_K",
    "factor_norm_C",
    "nonfinite_flag",
]
TIMING_COLUMN = "wall_ms"


@dataclasses.dataclass(frozen=True)
class TrainRecord:
    step: int
    train_loss: float
    test_error: float
    grad_norm: float
    factor_norm_K: float
    factor_norm_C: float
    nonfinite_flag: int
    wall_ms: float = 0.0

    def as_row(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def records_to_frame(records: Sequence[Dict[str, Any]], timing: bool = False) -> pd.DataFrame:
    """Metrics table in the fixed column order; wall_ms only with timing"""
    columns = RECORD_COLUMNS + ([TIMING_COLUMN] if timing else [])
    return pd.DataFrame(list(records), columns=RECORD_COLUMNS + [TIMING_COLUMN])[columns]


def grad_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))


def combined_factor_norms(states) -> tuple:
    """Root-sum-square of the per-layer K-side and C-side factor norms"""
    norms = [factor_norms(state) for state in states]
    return (
        math.sqrt(sum(k * k for k, _ in norms)),
        math.sqrt(sum(c * c for _, c in norms)),
    )


def evaluation_error(problem, weights: List[np.ndarray]) -> float:
    """Misclassification rate on the test split, or for the quadratic the
    relative distance of the weights to the optimum"""
    if problem.quadratic is not None:
        return relative_distance_to_optimum(problem.quadratic, weights[0], problem.optimum)
    model = problem.model.with_weights([np.asarray(w, dtype=np.float64) for w in weights])
    with np.errstate(all="ignore"):
        return 1.0 - accuracy(model, problem.test_x, problem.test_y)

