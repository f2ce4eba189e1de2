"""Error-bounded fast evaluators for information potentials.

Two approximations, each with an adaptive parameter recomputed from the
current kernel variance ``V`` on every call:

* sort-and-discard: pairs whose projected distance exceeds a threshold
  ``T(V, eps, p)`` are skipped; the retained pairs are enumerated with a
  two-pointer sweep over the sorted projections.
* binning: projections are grouped on a grid of width ``B(V, eps)`` and each
  group is replaced by its mean, weighted by its size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .potential import (
    TWO_PI,
    GradContext,
    PotentialValue,
    assemble,
    check_inputs,
    dense_sums,
    ip_exact,
    pair_sums,
)

MODES = ("exact", "discard", "bin")


@dataclass(frozen=True)
class ApproxConfig:
    """Evaluator selection.

    ``refine_p`` turns on a two-pass threshold: the first sweep (``p = 1``)
    measures the discarded fraction, which is then used as ``p``.  This
    discards more pairs but the error bound is no longer unconditional.
    """

    mode: str = "exact"
    epsilon: float = 0.0
    p_fraction: float = 1.0
    refine_p: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown evaluator mode {self.mode!r}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0 < self.p_fraction <= 1:
            raise ValueError(f"p_fraction must lie in (0, 1], got {self.p_fraction}")


def discard_threshold(var: float, epsilon: float, p: float = 1.0) -> float:
    """Smallest safe discard distance ``sqrt(max(0, -V ln(2 (eps/p)^2 pi V)))``.

    ``epsilon == 0`` means nothing may be discarded and returns ``inf``.
    """
    if epsilon == 0:
        return math.inf
    arg = 2.0 * (epsilon / p) ** 2 * math.pi * var
    return math.sqrt(max(0.0, -var * math.log(arg)))


def bin_width(var: float, epsilon: float) -> float:
    """Largest safe bin width ``sqrt(-2 V ln(max(0, 1 - eps sqrt(2 pi V))))``.

    Returns ``inf`` when any width is acceptable and ``0`` for
    ``epsilon == 0`` (callers then give every distinct value its own bin).
    """
    if epsilon == 0:
        return 0.0
    inner = 1.0 - epsilon * math.sqrt(TWO_PI * var)
    if inner <= 0:
        return math.inf
    return math.sqrt(-2.0 * var * math.log(inner))


# -- sort cache --------------------------------------------------------------

def insertion_sort_permutation(values, perm, max_moves=None):
    """Stable insertion sort of ``perm`` by ``values[perm]``.

    Returns ``(perm, moves)``.  When the number of element shifts would
    exceed ``max_moves`` the sort finishes with a stable merge sort of the
    seeded order instead, which yields the identical permutation.
    """
    vals = values.tolist()
    order = list(perm)
    n = len(order)
    moves = 0
    budget = math.inf if max_moves is None else max_moves
    for i in range(1, n):
        key = order[i]
        kv = vals[key]
        j = i - 1
        while j >= 0 and vals[order[j]] > kv:
            order[j + 1] = order[j]
            j -= 1
        shift = i - 1 - j
        if shift:
            order[j + 1] = key
            moves += shift
            if moves > budget:
                seeded = np.asarray(perm)
                out = seeded[np.argsort(values[seeded], kind="stable")]
                return out, moves
    return np.asarray(order, dtype=np.int64), moves


@dataclass
class SortCache:
    """Per-class sorting permutations carried across optimizer iterations.

    Owned by a single optimization run; not safe to share between threads.
    """

    perm_neg: np.ndarray | None = None
    perm_pos: np.ndarray | None = None
    last_projections: tuple | None = None
    last_moves: int = 0

    def update(self, proj_neg, proj_pos) -> "SortCache":
        proj_neg = np.asarray(proj_neg, dtype=np.float64)
        proj_pos = np.asarray(proj_pos, dtype=np.float64)
        if self.perm_neg is None or len(self.perm_neg) != len(proj_neg) \
                or len(self.perm_pos) != len(proj_pos):
            self.perm_neg = np.argsort(proj_neg, kind="stable")
            self.perm_pos = np.argsort(proj_pos, kind="stable")
            self.last_moves = 0
        else:
            moves = 0
            out = []
            for proj, perm in ((proj_neg, self.perm_neg), (proj_pos, self.perm_pos)):
                n = len(proj)
                budget = 4 * n + n * max(1, n.bit_length())
                sorted_perm, m = insertion_sort_permutation(proj, perm, budget)
                out.append(sorted_perm)
                moves += m
            self.perm_neg, self.perm_pos = out
            self.last_moves = moves
        self.last_projections = (proj_neg, proj_pos)
        return self


def sort_cache_update(cache: SortCache | None, proj_neg, proj_pos) -> SortCache:
    """Re-sort both classes, seeding insertion sort with the cached order."""
    if cache is None:
        cache = SortCache()
    return cache.update(proj_neg, proj_pos)


# -- sort and discard --------------------------------------------------------

@dataclass(frozen=True)
class DiscardStats:
    threshold: float
    pairs_retained: int
    pairs_discarded: int
    pairs: tuple | None = None  # (ia, ib) original indices; None = all pairs


def window_bounds(sa, sb, threshold):
    """Two-pointer sweep over sorted ``sa``/``sb``.

    For every ``sa[i]`` returns ``lo[i], hi[i]`` such that ``sb[lo:hi]`` are
    exactly the values with ``|sa[i] - sb[j]| <= threshold``.
    """
    a = sa.tolist()
    b = sb.tolist()
    m = len(b)
    lo = [0] * len(a)
    hi = [0] * len(a)
    j_lo = j_hi = 0
    # compare the differences themselves (not shifted bounds) so the window
    # agrees bit-for-bit with the |a - b| <= T rule
    for i, x in enumerate(a):
        while j_lo < m and x - b[j_lo] > threshold:
            j_lo += 1
        if j_hi < j_lo:
            j_hi = j_lo
        while j_hi < m and b[j_hi] - x <= threshold:
            j_hi += 1
        lo[i] = j_lo
        hi[i] = j_hi
    return np.asarray(lo, dtype=np.int64), np.asarray(hi, dtype=np.int64)


def _expand_windows(lo, hi):
    counts = hi - lo
    total = int(counts.sum())
    ia = np.repeat(np.arange(len(lo), dtype=np.int64), counts)
    starts = np.cumsum(counts) - counts
    ib = np.arange(total, dtype=np.int64) - np.repeat(starts - lo, counts)
    return ia, ib


def retained_pairs(a, b, threshold, order_a=None, order_b=None):
    """Original-index pairs with ``|a - b| <= threshold``.

    Returns ``None`` when every pair is retained.  A zero threshold discards
    everything, including coincident points.
    """
    n, m = len(a), len(b)
    if threshold == math.inf:
        return None
    if threshold <= 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    if order_a is None:
        order_a = np.argsort(a, kind="stable")
    if order_b is None:
        order_b = np.argsort(b, kind="stable")
    lo, hi = window_bounds(a[order_a], b[order_b], threshold)
    if int((hi - lo).sum()) == n * m:
        return None
    ia, ib = _expand_windows(lo, hi)
    return order_a[ia], order_b[ib]


def ip_discard(proj_a, proj_b, var: float, epsilon: float, p: float = 1.0, *,
               order_a=None, order_b=None, want_gradient: bool = False,
               grad_context: GradContext | None = None, pairs=None,
               refine_p: bool = False):
    """Potential restricted to pairs closer than the adaptive threshold.

    With ``p = 1`` the result is within ``epsilon`` of :func:`ip_exact`.
    ``pairs`` overrides the threshold with a previously retained pair set
    (``"all"`` for every pair), which keeps the evaluated function smooth in
    ``v`` for derivative checks.

    Returns
    -------
    (PotentialValue, DiscardStats)
    """
    a, b = check_inputs(proj_a, proj_b, var)
    n, m = len(a), len(b)
    if pairs is None:
        threshold = discard_threshold(var, epsilon, p)
        kept = retained_pairs(a, b, threshold, order_a, order_b)
        if refine_p and kept is not None and 0 < threshold < math.inf:
            discarded = n * m - len(kept[0])
            if discarded:
                threshold = discard_threshold(var, epsilon, discarded / (n * m))
                kept = retained_pairs(a, b, threshold, order_a, order_b)
    else:
        threshold = math.nan
        kept = None if isinstance(pairs, str) and pairs == "all" else pairs

    if kept is None:
        pv = ip_exact(a, b, var, want_gradient, grad_context)
        return pv, DiscardStats(threshold, n * m, 0, None)

    ia, ib = kept
    sums = pair_sums(a, b, ia, ib, var, need_grad=want_gradient)
    value, grad = assemble(sums, var, n, m, grad_context if want_gradient else None)
    retained = len(ia)
    return (PotentialValue(value, grad, retained, n * m),
            DiscardStats(threshold, retained, n * m - retained, (ia, ib)))


# -- binning -----------------------------------------------------------------

@dataclass(frozen=True)
class ClassBins:
    """Non-empty bins of one sample.

    ``assignment[i]`` is the bin (row of the other arrays) of source point i;
    ``grid_index`` is the bin's interval number on the shared grid.
    """

    grid_index: np.ndarray
    rep_projection: np.ndarray
    rep_point: np.ndarray
    count: np.ndarray
    assignment: np.ndarray


@dataclass(frozen=True)
class BinPartition:
    width: float
    anchor: float
    a: ClassBins
    b: ClassBins

    @property
    def assignment(self):
        return (self.a.assignment, self.a.grid_index), (self.b.assignment, self.b.grid_index)


def _grid_labels(a, b, width, anchor):
    if width == math.inf:
        return np.zeros(len(a), np.int64), np.zeros(len(b), np.int64)
    if width == 0:
        _, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
        inv = inv.astype(np.int64)
        return inv[: len(a)], inv[len(a):]
    la = np.floor((a - anchor) / width).astype(np.int64)
    lb = np.floor((b - anchor) / width).astype(np.int64)
    return la, lb


def _class_bins(proj, points, labels=None, frozen=None) -> ClassBins:
    if frozen is None:
        grid_index, assignment = np.unique(labels, return_inverse=True)
        assignment = assignment.astype(np.int64)
    else:
        assignment, grid_index = frozen
    k = len(grid_index)
    count = np.bincount(assignment, minlength=k)
    rep_proj = np.bincount(assignment, weights=proj, minlength=k) / count
    rep_point = np.zeros((k, points.shape[1]))
    np.add.at(rep_point, assignment, points)
    rep_point /= count[:, None]
    return ClassBins(grid_index, rep_proj, rep_point, count, assignment)


def build_partition(proj_a, proj_b, points_a, points_b, width, frozen=None) -> BinPartition:
    """Group both samples on one grid anchored at their joint minimum.

    Bins are half-open ``[anchor + i w, anchor + (i+1) w)``; each non-empty
    bin is summarised per sample by the mean projection, the mean original
    point and the member count.
    """
    a = np.asarray(proj_a, dtype=np.float64)
    b = np.asarray(proj_b, dtype=np.float64)
    anchor = float(min(a.min(), b.min()))
    if frozen is not None:
        fa, fb = frozen
        return BinPartition(width, anchor, _class_bins(a, points_a, frozen=fa),
                            _class_bins(b, points_b, frozen=fb))
    la, lb = _grid_labels(a, b, width, anchor)
    return BinPartition(width, anchor, _class_bins(a, points_a, la),
                        _class_bins(b, points_b, lb))


def ip_bin(proj_a, proj_b, points_a, points_b, var: float, epsilon: float, *,
           want_gradient: bool = False, dvar=None, assignment=None):
    """Potential computed on bin representatives weighted by bin counts.

    ``assignment`` (``BinPartition.assignment`` of an earlier call) reuses a
    bin membership; representatives are still recomputed from the current
    projections.  The gradient is the exact gradient of the binned value,
    taken through the representative points.

    Returns
    -------
    (PotentialValue, BinPartition)
    """
    a, b = check_inputs(proj_a, proj_b, var)
    width = bin_width(var, epsilon)
    part = build_partition(a, b, np.asarray(points_a), np.asarray(points_b),
                           width, frozen=assignment)
    ba, bb = part.a, part.b
    sums = dense_sums(ba.rep_projection, bb.rep_projection, var,
                      ba.count.astype(np.float64), bb.count.astype(np.float64),
                      need_grad=want_gradient)
    ctx = None
    if want_gradient:
        if dvar is None:
            raise ValueError("gradient requested without dV/dv")
        ctx = GradContext(ba.rep_point, bb.rep_point, dvar)
    value, grad = assemble(sums, var, len(a), len(b), ctx)
    return PotentialValue(value, grad, len(ba.count) * len(bb.count), len(a) * len(b)), part


# -- dispatch ----------------------------------------------------------------

def evaluate_term(cfg: ApproxConfig, proj_a, proj_b, points_a, points_b, var, *,
                  order_a=None, order_b=None, want_gradient=False, dvar=None,
                  frozen=None):
    """Evaluate one potential with the configured evaluator.

    Returns ``(PotentialValue, partition)`` where ``partition`` is what
    ``frozen`` accepts on a later call (``None`` for exact mode).
    """
    ctx = GradContext(points_a, points_b, dvar) if want_gradient else None
    if cfg.mode == "exact":
        return ip_exact(proj_a, proj_b, var, want_gradient, ctx), None
    if cfg.mode == "discard":
        pv, st = ip_discard(proj_a, proj_b, var, cfg.epsilon, cfg.p_fraction,
                            order_a=order_a, order_b=order_b,
                            want_gradient=want_gradient, grad_context=ctx,
                            pairs=frozen, refine_p=cfg.refine_p)
        return pv, ("all" if st.pairs is None else st.pairs)
    pv, part = ip_bin(proj_a, proj_b, points_a, points_b, var, cfg.epsilon,
                      want_gradient=want_gradient, dvar=dvar, assignment=frozen)
    return pv, part.assignment
