"""Experiment harness: data loading, cross validation, grids, reports, CLI."""

from .cv import stratified_kfold
from .data import load_csv, load_dataset, load_libsvm, standardize
from .grid import GridSpec, RunRecord, load_manifest, read_records, run_grid
from .reports import emit_reports, write_bounds

__all__ = [
    "GridSpec", "RunRecord", "emit_reports", "load_csv", "load_dataset",
    "load_libsvm", "load_manifest", "read_records", "run_grid", "standardize",
    "stratified_kfold", "write_bounds",
]
