from __future__ import annotations

import numpy as np

from ..core import LabeledDataset
from ..errors import TooFewPointsPerClass


def stratified_kfold(dataset: LabeledDataset, k: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified k-fold splits over ``dataset.points`` row indices.

    Each class is shuffled independently and dealt round-robin to the folds,
    so per-fold class counts differ by at most one.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if min(dataset.n_neg, dataset.n_pos) < k:
        raise TooFewPointsPerClass(
            f"class sizes {dataset.n_neg}/{dataset.n_pos} smaller than k={k}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(dataset), dtype=np.int64)
    offset = 0
    for idx in (np.arange(dataset.n_neg), dataset.n_neg + np.arange(dataset.n_pos)):
        shuffled = rng.permutation(idx)
        fold_of[shuffled] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    everything = np.arange(len(dataset))
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]
