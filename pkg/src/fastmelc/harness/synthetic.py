"""Seeded synthetic two-class data for tests and smoke runs."""

from __future__ import annotations

import numpy as np

from ..core import LabeledDataset


def gaussian_blobs(n_per_class: int, dim: int = 2, separation: float = 3.0,
                   seed=0, scale: float = 1.0) -> LabeledDataset:
    """Two isotropic Gaussian blobs whose means are *separation* standard
    deviations apart along a random unit direction."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    neg = rng.standard_normal((n_per_class, dim)) * scale
    pos = rng.standard_normal((n_per_class, dim)) * scale + separation * scale * direction
    return LabeledDataset(neg, pos)
