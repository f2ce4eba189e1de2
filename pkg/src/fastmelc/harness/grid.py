"""Cross-validated experiment grid over gamma, epsilon, evaluator and optimizer."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..approx import ApproxConfig
from ..classify import balanced_accuracy, fit, predict_many
from ..core import KdeParams, LabeledDataset
from ..errors import MelcError
from ..optimizer import OptimizerConfig
from .cv import stratified_kfold
from .data import load_dataset, standardize
from .reports import DEFAULT_EPSILONS

log = logging.getLogger(__name__)

DEFAULT_GAMMAS = (0.1, 0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class GridSpec:
    gammas: tuple = DEFAULT_GAMMAS
    epsilons: tuple = DEFAULT_EPSILONS
    methods: tuple = ("exact", "discard", "bin")
    optimizers: tuple = ("cg", "lbfgs")
    folds: int = 5
    restarts: int = 3
    master_seed: int = 0
    max_iterations: int = 500

    def __post_init__(self):
        for name in ("gammas", "epsilons", "methods", "optimizers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.gammas and self.epsilons):
            raise ValueError("gamma and epsilon lists must be non-empty")
        if self.folds < 2 or self.restarts < 1:
            raise ValueError("need folds >= 2 and restarts >= 1")
        bad = set(self.methods) - {"exact", "discard", "bin"}
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        bad = set(self.optimizers) - {"cg", "lbfgs"}
        if bad:
            raise ValueError(f"unknown optimizers {sorted(bad)}")


@dataclass
class RunRecord:
    dataset_name: str
    method: str
    optimizer: str
    gamma: float
    epsilon: float | None
    fold_index: int
    restart_seed: int
    bac: float = math.nan
    exp_calls_actual: int = 0
    exp_calls_naive: int = 0
    iterations: int = 0
    function_evaluations: int = 0
    final_norm: float = math.nan
    wall_time_ms: int = 0
    flag: str = ""

    @property
    def exp_ratio(self) -> float:
        return self.exp_calls_actual / self.exp_calls_naive if self.exp_calls_naive else math.nan


RECORD_FIELDS = [f.name for f in dataclasses.fields(RunRecord)]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def record_row(rec: RunRecord) -> list[str]:
    return [_fmt(getattr(rec, name)) for name in RECORD_FIELDS]


def read_records(path) -> list[RunRecord]:
    """Inverse of the CSV written by :func:`run_grid`."""
    types = {f.name: f.type for f in dataclasses.fields(RunRecord)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for name, raw in row.items():
                t = types[name]
                if name == "epsilon":
                    kw[name] = float(raw) if raw else None
                elif t in ("int",):
                    kw[name] = int(raw)
                elif t in ("float",):
                    kw[name] = float(raw)
                else:
                    kw[name] = raw
            out.append(RunRecord(**kw))
    return out


def derive_seed(master_seed: int, *key) -> int:
    """Stable 32-bit seed from the master seed and a cell key."""
    words = [int(master_seed) & 0xFFFFFFFF]
    for part in key:
        words.append(zlib.crc32(repr(part).encode()) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def start_seed(spec: GridSpec, dataset_name: str, fold: int) -> int:
    """Seed of the restart vectors, shared by every method, epsilon, gamma
    and optimizer evaluated on the same (dataset, fold)."""
    return derive_seed(spec.master_seed, dataset_name, "starts", fold)


@dataclass(frozen=True)
class Cell:
    dataset_name: str
    fold_index: int
    gamma: float
    optimizer: str
    method: str
    epsilon: float | None


def grid_cells(name: str, spec: GridSpec):
    for fold in range(spec.folds):
        for gamma in spec.gammas:
            for optimizer in spec.optimizers:
                for method in spec.methods:
                    if method == "exact":
                        yield Cell(name, fold, gamma, optimizer, method, None)
                    else:
                        for eps in spec.epsilons:
                            yield Cell(name, fold, gamma, optimizer, method, eps)


def run_cell(dataset: LabeledDataset, train_idx, test_idx, cell: Cell,
             spec: GridSpec) -> RunRecord:
    """Fit on the training split and score the test split; never raises for
    modelling failures, which are recorded in ``flag``."""
    seed = start_seed(spec, cell.dataset_name, cell.fold_index)
    rec = RunRecord(cell.dataset_name, cell.method, cell.optimizer, cell.gamma,
                    cell.epsilon, cell.fold_index, seed)
    approx = ApproxConfig(cell.method, cell.epsilon or 0.0)
    opt = OptimizerConfig(method=cell.optimizer, max_iterations=spec.max_iterations, seed=seed)
    t0 = time.perf_counter()
    try:
        model = fit(dataset.subset(train_idx), KdeParams(cell.gamma), approx, opt,
                    n_starts=spec.restarts, seed=seed)
        test = dataset.subset(test_idx)
        metrics = balanced_accuracy(predict_many(model, test.points), test.labels)
        meta = model.training_meta
        rec.bac = metrics.bac
        rec.exp_calls_actual = meta["exp_calls_total"]
        rec.exp_calls_naive = meta["naive_pairs_total"]
        rec.iterations = meta["iterations"]
        rec.function_evaluations = meta["function_evaluations_total"]
        rec.final_norm = meta["final_norm"]
        flags = list(metrics.flags)
        if meta["failed_runs"]:
            flags.append(f"failed_restarts={meta['failed_runs']}")
        rec.flag = ";".join(flags)
    except (MelcError, ArithmeticError, ValueError) as exc:
        rec.flag = f"error:{type(exc).__name__}:{exc}"
        log.warning("cell %s failed: %s", cell, exc)
    rec.wall_time_ms = int(round(1000 * (time.perf_counter() - t0)))
    return rec


def _run_task(args):
    return run_cell(*args)


def run_grid(datasets: dict, spec: GridSpec, output_path=None, workers: int = 1) -> list[RunRecord]:
    """Run every grid cell and return the records in grid order.

    *datasets* maps names to :class:`LabeledDataset`.  Records are appended to
    the CSV at *output_path* as they complete (header first).  With
    ``workers > 1`` cells run in a process pool; results are still written in
    grid order, so the output does not depend on scheduling.
    """
    tasks = []
    for name, ds in datasets.items():
        splits = stratified_kfold(ds, spec.folds, derive_seed(spec.master_seed, name, "folds"))
        for cell in grid_cells(name, spec):
            train_idx, test_idx = splits[cell.fold_index]
            tasks.append((ds, train_idx, test_idx, cell, spec))

    fh = writer = None
    if output_path is not None:
        Path(output_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(output_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        fh.flush()
    records = []
    try:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_run_task, tasks)
                for rec in results:
                    records.append(rec)
                    if writer:
                        writer.writerow(record_row(rec))
                        fh.flush()
        else:
            for task in tasks:
                rec = _run_task(task)
                records.append(rec)
                if writer:
                    writer.writerow(record_row(rec))
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return records


@dataclass
class Manifest:
    datasets: list = field(default_factory=list)
    spec: GridSpec = field(default_factory=GridSpec)
    workers: int = 1


def load_manifest(path) -> Manifest:
    """Read a JSON run manifest.

    ::

        {"datasets": [{"name": "fourclass", "path": "data/fourclass",
                       "format": "libsvm", "label_column": 0,
                       "scale": "none"}],
         "grid": {"folds": 5, "restarts": 3, "optimizers": ["cg"]},
         "workers": 1}

    Relative dataset paths are resolved against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    entries = []
    for item in doc.get("datasets", []):
        p = Path(item["path"])
        if not p.is_absolute():
            p = path.parent / p
        entries.append({
            "name": item.get("name", p.stem),
            "path": p,
            "format": item.get("format"),
            "label_column": item.get("label_column", 0),
            "scale": item.get("scale", "none"),
        })
    spec = GridSpec(**doc.get("grid", {}))
    return Manifest(entries, spec, int(doc.get("workers", 1)))


def load_manifest_datasets(manifest: Manifest) -> dict:
    out = {}
    for item in manifest.datasets:
        ds = load_dataset(item["path"], item["format"], item["label_column"])
        out[item["name"]] = standardize(ds, item["scale"])
    return out
