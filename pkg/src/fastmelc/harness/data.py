"""Dataset loaders for libSVM sparse text and CSV tables."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..core import LabeledDataset
from ..errors import NotBinary, ParseError, RaggedRows, TooSmallClass


def _binary_labels(raw) -> np.ndarray:
    """Map two distinct numeric labels to -1 (smaller) and +1 (larger)."""
    raw = np.asarray(raw, dtype=np.float64)
    values = np.unique(raw)
    if len(values) != 2:
        raise NotBinary(f"expected 2 distinct labels, found {len(values)}: {values[:5]}")
    return np.where(raw == values[1], 1, -1)


def _make_dataset(points, labels) -> LabeledDataset:
    n_pos = int(np.sum(labels > 0))
    n_neg = len(labels) - n_pos
    if min(n_pos, n_neg) < 2:
        raise TooSmallClass(f"class sizes {n_neg} / {n_pos}; need at least 2 each")
    return LabeledDataset.from_labeled(points, labels)


def parse_libsvm(lines):
    """Parse libSVM lines into ``(dense points, raw labels)``."""
    rows, labels = [], []
    dim = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, *items = line.split()
        try:
            labels.append(float(head))
        except ValueError:
            raise ParseError(f"bad label {head!r}", lineno) from None
        row = {}
        last = 0
        for item in items:
            idx, sep, val = item.partition(":")
            try:
                i, x = int(idx), float(val)
            except ValueError:
                raise ParseError(f"bad feature {item!r}", lineno) from None
            if not sep or i < 1:
                raise ParseError(f"bad feature {item!r}", lineno)
            if i <= last:
                raise ParseError("feature indices must be strictly ascending", lineno)
            last = i
            row[i] = x
        dim = max(dim, last)
        rows.append(row)
    if not rows:
        raise ParseError("no data lines")
    points = np.zeros((len(rows), dim))
    for r, row in enumerate(rows):
        for i, x in row.items():
            points[r, i - 1] = x
    return points, np.asarray(labels)


def load_libsvm(path) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        points, raw = parse_libsvm(fh)
    return _make_dataset(points, _binary_labels(raw))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column) -> LabeledDataset:
    """Load a numeric CSV table.

    *label_column* is a header name, or a 0-based position (int or digit
    string) when the file has no header.  A header is assumed when the first
    row has any non-numeric field.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(f.strip() for f in r)]
    if not rows:
        raise ParseError("empty CSV file")
    header = None
    if not all(_is_number(f) for f in rows[0]):
        header = [f.strip() for f in rows[0]]
        rows = rows[1:]
    width = len(header) if header is not None else len(rows[0])
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise RaggedRows(f"line {lineno}: {len(row)} fields, expected {width}")
    if isinstance(label_column, str) and header is not None and label_column in header:
        col = header.index(label_column)
    else:
        try:
            col = int(label_column)
        except (TypeError, ValueError):
            raise ParseError(f"label column {label_column!r} not found") from None
        if not -width <= col < width:
            raise ParseError(f"label column {col} out of range")
        col %= width
    try:
        table = np.array([[float(f) for f in row] for row in rows])
    except ValueError as exc:
        raise ParseError(f"non-numeric field: {exc}") from None
    labels = _binary_labels(table[:, col])
    points = np.delete(table, col, axis=1)
    return _make_dataset(points, labels)


def load_dataset(path, fmt: str | None = None, label_column=0) -> LabeledDataset:
    """Dispatch on *fmt* (``libsvm``/``csv``) or the file extension."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    if fmt == "csv":
        return load_csv(path, label_column)
    if fmt == "libsvm":
        return load_libsvm(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def standardize(dataset: LabeledDataset, kind: str = "standard") -> LabeledDataset:
    """Per-feature rescaling (``standard``: zero mean/unit variance,
    ``minmax``: into [-1, 1]); constant features are left centred."""
    X = dataset.points
    if kind == "none":
        return dataset
    if kind == "standard":
        center, scale = X.mean(axis=0), X.std(axis=0)
    elif kind == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        center, scale = (lo + hi) / 2, (hi - lo) / 2
    else:
        raise ValueError(f"unknown scaling {kind!r}")
    scale = np.where(scale > 0, scale, 1.0)
    return LabeledDataset.from_labeled((X - center) / scale, dataset.labels)
