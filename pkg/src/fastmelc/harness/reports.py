"""Aggregate grid records into the summary tables (CSV only)."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..approx import bin_width, discard_threshold
from ..errors import EmptyRecords

DEFAULT_EPSILONS = (0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5)


def _write(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _ok(rec) -> bool:
    return not rec.flag.startswith("error") and math.isfinite(rec.bac)


def exp_call_ratios(records):
    """``{(dataset, optimizer, method): (pooled ratio, mean per-cell ratio, cells)}``.

    The pooled ratio is total kernel evaluations over total naive pair
    counts of the same evaluations.
    """
    acc = defaultdict(lambda: [0, 0, []])
    for r in records:
        if not _ok(r) or not r.exp_calls_naive:
            continue
        a = acc[(r.dataset_name, r.optimizer, r.method)]
        a[0] += r.exp_calls_actual
        a[1] += r.exp_calls_naive
        a[2].append(r.exp_calls_actual / r.exp_calls_naive)
    return {k: (a[0] / a[1], float(np.mean(a[2])), len(a[2])) for k, a in sorted(acc.items())}


def mean_iterations(records):
    acc = defaultdict(list)
    for r in records:
        if _ok(r):
            acc[(r.dataset_name, r.optimizer, r.method)].append(r.iterations)
    return {k: (float(np.mean(v)), len(v)) for k, v in sorted(acc.items())}


def bac_deltas(records):
    """Mean ``BAC_exact - BAC_approx`` per ``(dataset, method, gamma, epsilon)``.

    Each approximate cell is paired with the exact cell sharing its dataset,
    fold, gamma and optimizer.
    """
    exact = {(r.dataset_name, r.fold_index, r.gamma, r.optimizer): r.bac
             for r in records if r.method == "exact" and _ok(r)}
    acc = defaultdict(list)
    for r in records:
        if r.method == "exact" or not _ok(r):
            continue
        ref = exact.get((r.dataset_name, r.fold_index, r.gamma, r.optimizer))
        if ref is None:
            continue
        acc[(r.dataset_name, r.method, r.gamma, r.epsilon)].append(ref - r.bac)
    return {k: (float(np.mean(v)), len(v)) for k, v in sorted(acc.items())}


def bounds_table(v_values, eps_min=1e-3, eps_max=0.5, steps=100):
    """Rows ``(V, epsilon, T, B)`` on a log-spaced epsilon grid."""
    eps_grid = np.geomspace(eps_min, eps_max, steps) if steps > 1 else np.array([eps_min])
    rows = []
    for var in v_values:
        for eps in eps_grid:
            eps = float(eps)
            rows.append((float(var), eps, discard_threshold(var, eps), bin_width(var, eps)))
    return rows


def write_bounds(path, v_values=(0.5, 1.0, 2.0), eps_min=1e-3, eps_max=0.5, steps=100,
                 extra_eps=()):
    rows = bounds_table(v_values, eps_min, eps_max, steps)
    for var in v_values:
        for eps in extra_eps:
            rows.append((float(var), float(eps), discard_threshold(var, eps), bin_width(var, eps)))
    _write(Path(path), ["V", "epsilon", "discard_threshold", "bin_width"], rows)
    return rows


def emit_reports(records, out_dir) -> dict:
    """Write ``ratios.csv``, ``iterations.csv``, ``bac_delta.csv`` and
    ``bounds.csv`` to *out_dir*; returns the paths."""
    if not records:
        raise EmptyRecords("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("ratios", "iterations", "bac_delta", "bounds")}
    _write(paths["ratios"], ["dataset", "optimizer", "method", "ratio", "mean_cell_ratio", "cells"],
           [(*k, *v) for k, v in exp_call_ratios(records).items()])
    _write(paths["iterations"], ["dataset", "optimizer", "method", "mean_iterations", "cells"],
           [(*k, *v) for k, v in mean_iterations(records).items()])
    _write(paths["bac_delta"], ["dataset", "method", "gamma", "epsilon", "mean_bac_delta", "cells"],
           [(*k, *v) for k, v in bac_deltas(records).items()])
    eps = sorted({r.epsilon for r in records if r.epsilon is not None} | set(DEFAULT_EPSILONS))
    write_bounds(paths["bounds"], extra_eps=eps)
    return paths
