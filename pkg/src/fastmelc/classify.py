"""MELC model fitting, density-comparison prediction and balanced accuracy."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .approx import ApproxConfig
from .core import KdeParams, LabeledDataset, project, variance_profile
from .errors import DimensionMismatch, LengthMismatch
from .optimizer import (
    OptimizerConfig,
    dcs_objective,
    multi_restart,
    optimize,
    penalized_objective,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class MelcModel:
    v: np.ndarray
    train_proj_neg: np.ndarray
    train_proj_pos: np.ndarray
    h_neg: float
    h_pos: float
    gamma: float
    training_meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.v)

    def to_json(self) -> str:
        """Serialize with hex floats so a round trip is bit-exact."""
        hexlist = lambda a: [float(x).hex() for x in a]  # noqa: E731
        doc = {
            "format": "fastmelc-model/1",
            "v": hexlist(self.v),
            "gamma": float(self.gamma).hex(),
            "h_neg": float(self.h_neg).hex(),
            "h_pos": float(self.h_pos).hex(),
            "train_proj_neg": hexlist(self.train_proj_neg),
            "train_proj_pos": hexlist(self.train_proj_pos),
            "training_meta": self.training_meta,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MelcModel":
        doc = json.loads(text)
        unhex = lambda xs: np.array([float.fromhex(x) for x in xs])  # noqa: E731
        return cls(
            v=unhex(doc["v"]),
            train_proj_neg=unhex(doc["train_proj_neg"]),
            train_proj_pos=unhex(doc["train_proj_pos"]),
            h_neg=float.fromhex(doc["h_neg"]),
            h_pos=float.fromhex(doc["h_pos"]),
            gamma=float.fromhex(doc["gamma"]),
            training_meta=doc.get("training_meta", {}),
        )


def model_from_direction(dataset: LabeledDataset, v, params: KdeParams,
                         meta: dict | None = None) -> MelcModel:
    """Normalize *v* and store the projected training set and bandwidths."""
    v = np.asarray(v, dtype=np.float64)
    v = v / np.linalg.norm(v)
    pn = project(dataset.points_neg, v)
    pp = project(dataset.points_pos, v)
    prof = variance_profile(dataset, v, params, pn, pp)
    return MelcModel(v, pn, pp, prof.h_neg, prof.h_pos, params.gamma, meta or {})


def fit(dataset: LabeledDataset, params: KdeParams, approx: ApproxConfig | None = None,
        opt: OptimizerConfig | None = None, n_starts: int = 3,
        seed=None) -> MelcModel:
    """Train a MELC model by maximizing the penalized divergence.

    Every restart gets a fresh objective (own sort cache and counters); the
    metadata aggregates counters over all restarts and records the winner.
    *seed* defaults to ``opt.seed``.
    """
    approx = approx or ApproxConfig()
    opt = opt or OptimizerConfig()
    seed = opt.seed if seed is None else seed
    runs: list = []

    def train(v0):
        obj = penalized_objective(dcs_objective(dataset, params, approx))
        return optimize(obj, v0, opt)

    best = multi_restart(train, n_starts, seed, dataset.dim, runs=runs)
    done = [r for r in runs if not isinstance(r, Exception)]
    meta = {
        "method": approx.mode,
        "epsilon": approx.epsilon,
        "optimizer": opt.method,
        "seed": seed,
        "n_starts": n_starts,
        "value_final": best.value_final,
        "iterations": best.iterations,
        "function_evaluations": best.function_evaluations,
        "converged": best.converged,
        "final_norm": best.final_norm,
        "message": best.message,
        "iterations_total": sum(r.iterations for r in done),
        "function_evaluations_total": sum(r.function_evaluations for r in done),
        "exp_calls_total": sum(r.exp_calls_total for r in done),
        "naive_pairs_total": sum(r.naive_pairs_total for r in done),
        "failed_runs": len(runs) - len(done),
    }
    return model_from_direction(dataset, best.v_final, params, meta)


def class_densities(model: MelcModel, t):
    """Projected class-conditional KDE densities at the points *t*."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = []
    for proj, h in ((model.train_proj_neg, model.h_neg), (model.train_proj_pos, model.h_pos)):
        z = (t[:, None] - proj[None, :]) / h
        out.append(np.exp(-0.5 * z * z).sum(axis=1) / (len(proj) * h * SQRT_2PI))
    return out[0], out[1]


def predict_many(model: MelcModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise DimensionMismatch(f"model expects {model.dim} features, got {X.shape[1]}")
    g_neg, g_pos = class_densities(model, X @ model.v)
    return np.where(g_neg > g_pos, -1, 1)


def predict(model: MelcModel, x) -> int:
    """Label of a single point: the class with the larger density, ties to +1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict expects a single vector; use predict_many")
    return int(predict_many(model, x[None, :])[0])


@dataclass(frozen=True)
class EvalMetrics:
    bac: float
    tp: int
    tn: int
    fp: int
    fn: int
    flags: tuple = ()

    def as_dict(self):
        return asdict(self)


def balanced_accuracy(predictions, truth) -> EvalMetrics:
    """Mean of the two per-class recalls.

    A class missing from *truth* contributes a recall of 0 and is flagged.
    """
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.shape} predictions for {true.shape} labels")
    if pred.size == 0:
        raise LengthMismatch("empty evaluation set")
    pos, neg = true > 0, true < 0
    tp = int(np.sum(pos & (pred > 0)))
    fn = int(np.sum(pos & (pred <= 0)))
    tn = int(np.sum(neg & (pred < 0)))
    fp = int(np.sum(neg & (pred >= 0)))
    flags = []
    if tp + fn:
        rec_pos = tp / (tp + fn)
    else:
        rec_pos = 0.0
        flags.append("no_positive_samples")
    if tn + fp:
        rec_neg = tn / (tn + fp)
    else:
        rec_neg = 0.0
        flags.append("no_negative_samples")
    return EvalMetrics(0.5 * (rec_pos + rec_neg), tp, tn, fp, fn, tuple(flags))
