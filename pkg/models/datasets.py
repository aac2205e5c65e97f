import logging
from typing import Iterator, Tuple

import numpy as np
import pandas as pd

from utils.errors import ContractError

logger = logging.getLogger(__name__)


def make_gaussian_blobs(
    n_samples: int, n_features: int, n_classes: int, noise: float = 0.6, seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian clusters with balanced, shuffled labels

    Returns:
        (features of shape n x d, integer labels of shape n)
    """
    if n_classes < 2 or n_samples < n_classes:
        raise ContractError("Need at least two classes and one sample per class")
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=2.0, size=(n_classes, n_features))
    labels = rng.permutation(np.arange(n_samples) % n_classes)
    features = centers[labels] + noise * rng.normal(size=(n_samples, n_features))
    return features, labels


def load_csv_dataset(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read a `label,f0,f1,...` CSV

    Labels may be any values; they are mapped to 0..K-1 in sorted order.

    Returns:
        (features as float64, integer labels)
    """
    frame = pd.read_csv(path, encoding="utf-8")
    if frame.columns.empty or frame.columns[0] != "label":
        raise ContractError(f"{path}: the first column must be named 'label'")
    if frame.shape[1] < 2:
        raise ContractError(f"{path}: no feature columns")
    if frame.isna().any().any():
        raise ContractError(f"{path}: missing values are not supported")
    _, labels = np.unique(frame["label"].to_numpy(), return_inverse=True)
    features = frame.drop(columns=["label"]).to_numpy(dtype=np.float64)
    logger.info(f"Loaded {features.shape[0]} rows with {features.shape[1]} features from {path}")
    return features, labels.astype(int)


def train_test_split(features, labels, test_fraction: float = 0.25, seed: int = 0):
    """Seeded shuffle split; both parts keep at least one row

    Returns:
        (train features, train labels, test features, test labels)
    """
    n = features.shape[0]
    if n < 2:
        raise ContractError("Need at least two rows to split")
    order = np.random.default_rng(seed).permutation(n)
    n_test = min(max(int(round(test_fraction * n)), 1), n - 1)
    test, train = order[:n_test], order[n_test:]
    return features[train], labels[train], features[test], labels[test]


def standardize(train: np.ndarray, test: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scale both splits with the training mean and standard deviation"""
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return (train - mean) / std, (test - mean) / std


def iterate_minibatches(n: int, batch_size: int, seed: int = 0) -> Iterator[np.ndarray]:
    """Endless stream of index batches, reshuffled every epoch

    A batch never spans two epochs; a short tail batch is yielded as is.
    """
    if n < 1 or batch_size < 1:
        raise ContractError("Need a nonempty dataset and a positive batch size")
    rng = np.random.default_rng(seed)
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size]
