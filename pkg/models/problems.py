"""
Turns the task and model sections of a run configuration into concrete
training problems: a dataset plus an MLP, or a Kronecker quadratic.
"""

import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from models.datasets import load_csv_dataset, make_gaussian_blobs, standardize, train_test_split
from models.mlp import MLP, init_mlp
from models.tasks import KroneckerQuadratic, kronecker_quadratic_optimum, make_kronecker_quadratic

logger = logging.getLogger(__name__)


class Problem(NamedTuple):
    kind: str
    model: Optional[MLP] = None
    quadratic: Optional[KroneckerQuadratic] = None
    optimum: Optional[np.ndarray] = None
    train_x: Optional[np.ndarray] = None
    train_y: Optional[np.ndarray] = None
    test_x: Optional[np.ndarray] = None
    test_y: Optional[np.ndarray] = None

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        if self.quadratic is not None:
            return [self.quadratic.shape]
        return self.model.layer_shapes


def build_problem(run_cfg) -> Problem:
    """Generate or load the data and initialize the parameters

    All randomness derives from run_cfg.seed.
    """
    task_cfg, model_cfg, seed = run_cfg.task, run_cfg.model, run_cfg.seed

    if task_cfg.kind == "kronecker_quadratic":
        quadratic = make_kronecker_quadratic(
            task_cfg.d_in, task_cfg.d_out, task_cfg.condition, seed=seed
        )
        return Problem(
            kind=task_cfg.kind,
            quadratic=quadratic,
            optimum=kronecker_quadratic_optimum(quadratic),
        )

    if task_cfg.kind == "csv_classification":
        features, labels = load_csv_dataset(task_cfg.path)
    else:
        features, labels = make_gaussian_blobs(
            task_cfg.n_samples,
            task_cfg.n_features,
            task_cfg.n_classes,
            task_cfg.noise,
            seed=seed,
        )
    train_x, train_y, test_x, test_y = train_test_split(
        features, labels, task_cfg.test_fraction, seed=seed + 1
    )
    train_x, test_x = standardize(train_x, test_x)

    n_classes = int(labels.max()) + 1
    dims = [features.shape[1], *model_cfg.hidden, n_classes]
    model = init_mlp(dims, model_cfg.activation, seed=seed + 2)
    logger.info(
        f"Built {task_cfg.kind} problem: {train_x.shape[0]} train rows, "
        f"{test_x.shape[0]} test rows, layers {model.layer_shapes}"
    )
    return Problem(
        kind=task_cfg.kind,
        model=model,
        train_x=train_x,
        train_y=train_y,
        test_x=test_x,
        test_y=test_y,
    )
