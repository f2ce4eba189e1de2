"""Command line interface: ``fastmelc {train,eval,grid,bounds}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..approx import ApproxConfig
from ..classify import MelcModel, balanced_accuracy, fit, predict_many
from ..core import KdeParams
from ..errors import DataError, MelcError
from ..optimizer import OptimizerConfig
from .data import load_dataset, standardize
from .grid import load_manifest, load_manifest_datasets, run_grid
from .reports import emit_reports, write_bounds

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")


def _data_args(p):
    p.add_argument("data", help="libSVM or CSV dataset")
    p.add_argument("--format", choices=["libsvm", "csv"], default=None,
                   help="default: csv for *.csv files, libsvm otherwise")
    p.add_argument("--label-column", default="0", help="CSV label column (name or index)")
    p.add_argument("--scale", choices=["none", "standard", "minmax"], default="none")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastmelc",
                     description="Train, evaluate and benchmark MELC classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    _data_args(p)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--method", choices=["exact", "discard", "bin"], default="exact")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--optimizer", choices=["cg", "lbfgs"], default="cg")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")

    p = sub.add_parser("eval", help="score a saved model on a dataset")
    p.add_argument("model")
    _data_args(p)

    p = sub.add_parser("grid", help="run a manifest's experiment grid and write reports")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("bounds", help="tabulate discard threshold and bin width vs epsilon")
    p.add_argument("--v-values", type=_floats, default=[0.5, 1.0, 2.0])
    p.add_argument("--eps-min", type=float, default=1e-3)
    p.add_argument("--eps-max", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", default="bounds.csv")
    return parser


def _load(args):
    ds = load_dataset(args.data, args.format, args.label_column)
    return standardize(ds, args.scale)


def cmd_train(args) -> int:
    ds = _load(args)
    try:
        approx = ApproxConfig(args.method, args.epsilon)
        opt = OptimizerConfig(method=args.optimizer, max_iterations=args.max_iterations,
                              seed=args.seed)
        params = KdeParams(args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model = fit(ds, params, approx, opt, n_starts=args.restarts)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    metrics = balanced_accuracy(predict_many(model, ds.points), ds.labels)
    print(json.dumps({"model": str(args.out), "train_bac": metrics.bac,
                      **{k: model.training_meta[k] for k in
                         ("iterations", "exp_calls_total", "naive_pairs_total", "final_norm")}}))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = MelcModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from exc
    ds = _load(args)
    m = balanced_accuracy(predict_many(model, ds.points), ds.labels)
    print(json.dumps(m.as_dict()))
    return EXIT_OK


def cmd_grid(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad manifest: {exc}") from exc
    datasets = load_manifest_datasets(manifest)
    out = Path(args.out)
    workers = args.workers if args.workers is not None else manifest.workers
    records = run_grid(datasets, manifest.spec, out / "records.csv", workers=workers)
    if records:
        emit_reports(records, out)
    print(f"{len(records)} records written to {out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if not (0 < args.eps_min <= args.eps_max) or args.steps < 1 or not args.v_values \
            or min(args.v_values) <= 0:
        raise UsageError("need 0 < eps-min <= eps-max, steps >= 1 and positive V values")
    write_bounds(args.out, args.v_values, args.eps_min, args.eps_max, args.steps)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "grid": cmd_grid, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fastmelc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"fastmelc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MelcError as exc:
        print(f"fastmelc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
