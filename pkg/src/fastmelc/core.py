"""Domain types, linear projection and Silverman bandwidths."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateProjection, DimensionMismatch, TooSmallClass

#: Projected sample variances below this are treated as a collapsed class.
MIN_VARIANCE = 1e-300


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Two-class point cloud.

    Rows ``0 .. n_neg-1`` of :attr:`points` are the negative class, the rest
    are positive; index-based helpers (:meth:`subset`, cross validation) rely
    on that ordering.
    """

    points_neg: np.ndarray
    points_pos: np.ndarray

    def __post_init__(self):
        neg = _frozen_array(self.points_neg)
        pos = _frozen_array(self.points_pos)
        if neg.ndim != 2 or pos.ndim != 2:
            raise DimensionMismatch("class point sets must be 2-D arrays")
        if neg.shape[1] != pos.shape[1] or neg.shape[1] < 1:
            raise DimensionMismatch(
                f"classes have {neg.shape[1]} and {pos.shape[1]} coordinates"
            )
        if len(neg) < 2 or len(pos) < 2:
            raise TooSmallClass(
                f"each class needs at least 2 points, got {len(neg)} and {len(pos)}"
            )
        if not (np.isfinite(neg).all() and np.isfinite(pos).all()):
            raise ValueError("dataset contains non-finite coordinates")
        object.__setattr__(self, "points_neg", neg)
        object.__setattr__(self, "points_pos", pos)

    @classmethod
    def from_labeled(cls, points, labels) -> "LabeledDataset":
        points = np.asarray(points, dtype=np.float64)
        labels = np.asarray(labels)
        return cls(points[labels < 0], points[labels > 0])

    @property
    def dim(self) -> int:
        return self.points_neg.shape[1]

    @property
    def n_neg(self) -> int:
        return len(self.points_neg)

    @property
    def n_pos(self) -> int:
        return len(self.points_pos)

    def __len__(self) -> int:
        return self.n_neg + self.n_pos

    @cached_property
    def points(self) -> np.ndarray:
        out = np.vstack([self.points_neg, self.points_pos])
        out.setflags(write=False)
        return out

    @cached_property
    def labels(self) -> np.ndarray:
        out = np.concatenate([-np.ones(self.n_neg, int), np.ones(self.n_pos, int)])
        out.setflags(write=False)
        return out

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset.from_labeled(self.points[idx], self.labels[idx])


@dataclass(frozen=True)
class KdeParams:
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def silverman_factor(n: int) -> float:
    """(4 / (3 n)) ** (1/5), the 1-D Gaussian rule-of-thumb factor."""
    return (4.0 / (3.0 * n)) ** 0.2


@dataclass(frozen=True)
class VarianceProfile:
    """Per-class bandwidths and the kernel variances of the three potentials."""

    h_neg: float
    h_pos: float
    kappa_neg: float
    kappa_pos: float
    v_cross: float
    v_self_neg: float
    v_self_pos: float
    sigma2_neg: float
    sigma2_pos: float


def project(points, v) -> np.ndarray:
    """Inner products ``<v, x>`` for every row ``x`` of *points*."""
    points = np.asarray(points, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if v.ndim != 1 or points.shape[1] != v.shape[0]:
        raise DimensionMismatch(
            f"points have {points.shape[-1]} coordinates, v has {v.shape}"
        )
    return points @ v


def _class_sigma2(proj: np.ndarray) -> float:
    return float(np.var(proj, ddof=1))


def variance_profile(dataset: LabeledDataset, v, params: KdeParams,
                     proj_neg=None, proj_pos=None) -> VarianceProfile:
    """Silverman bandwidths of both projected classes.

    ``h_c = gamma * (4 / (3 n_c)) ** (1/5) * sigma_c`` with ``sigma_c`` the
    sample (n-1) standard deviation of the projected class.  Precomputed
    projections may be passed to avoid recomputing them.

    Raises
    ------
    DegenerateProjection
        If either class has projected variance below ``MIN_VARIANCE``.
    """
    if proj_neg is None:
        proj_neg = project(dataset.points_neg, v)
    if proj_pos is None:
        proj_pos = project(dataset.points_pos, v)
    s_neg = _class_sigma2(proj_neg)
    s_pos = _class_sigma2(proj_pos)
    if not (s_neg >= MIN_VARIANCE and s_pos >= MIN_VARIANCE):
        raise DegenerateProjection(
            f"projected class variances {s_neg:g}, {s_pos:g}"
        )
    g2 = params.gamma ** 2
    k_neg = g2 * silverman_factor(dataset.n_neg) ** 2
    k_pos = g2 * silverman_factor(dataset.n_pos) ** 2
    h_neg = float(np.sqrt(k_neg * s_neg))
    h_pos = float(np.sqrt(k_pos * s_pos))
    hn2 = h_neg * h_neg
    hp2 = h_pos * h_pos
    return VarianceProfile(
        h_neg=h_neg,
        h_pos=h_pos,
        kappa_neg=k_neg,
        kappa_pos=k_pos,
        v_cross=hn2 + hp2,
        v_self_neg=2.0 * hn2,
        v_self_pos=2.0 * hp2,
        sigma2_neg=s_neg,
        sigma2_pos=s_pos,
    )


def sigma2_gradient(points, proj) -> np.ndarray:
    """Gradient of the projected sample variance, ``2 S v``."""
    centered = proj - proj.mean()
    return 2.0 * (points.T @ centered) / (len(proj) - 1)
