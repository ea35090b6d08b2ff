"""Command line front end: ``budgetsvm train | eval | sweep``.

Exit codes: 0 on success, 1 for usage, parse and configuration errors,
2 for I/O errors.
"""

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import merge
from .data import load_svmlight, minmax_scale, resolve_path, split
from .diagnostics import confusion_counts, evaluate_accuracy
from .exceptions import BudgetSVMError
from .model import BudgetedModel
from .presets import preset
from .sgd import TrainConfig, train

SWEEP_COLUMNS = (
    "dataset", "B", "M", "strategy", "seed", "accuracy",
    "total_seconds", "merge_fraction", "avg_gradient_error", "final_sv_count",
)
SWEEP_KEY = ("dataset", "B", "M", "strategy", "seed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O errors here
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_data_args(p):
    p.add_argument("--data", required=True, help="training file (svmlight, optionally gzipped)")
    p.add_argument("--test", help="test file; accuracy is reported on it")
    p.add_argument("--split", type=float, help="train fraction for a random split when no --test is given")
    p.add_argument("--scale", action="store_true", help="min-max scale features using the training range")
    p.add_argument("--preset", help="dataset preset supplying C and gamma")
    p.add_argument("--C", type=float, dest="C")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--gamma", type=float)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--gd-refine", action="store_true", help="seed mm-gd with the mm-bsgd cascade result")
    p.add_argument("--gs-tol", type=float, default=merge.GS_TOL)
    p.add_argument("--gd-tol", type=float, default=merge.GD_TOL)
    p.add_argument("--gd-max-iter", type=int, default=merge.GD_MAX_ITER)


def build_parser():
    parser = _Parser(prog="budgetsvm", description="Budgeted kernel SVM training with multi-merge.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model")
    _add_data_args(p)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--mergees", type=int, default=2)
    p.add_argument("--strategy", default="mm-bsgd", choices=merge.STRATEGIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out")
    p.add_argument("--report-out", help="CSV file for the run report")

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("sweep", help="run a budget x mergees x strategy x seed grid")
    _add_data_args(p)
    p.add_argument("--budgets", type=int, nargs="+", required=True)
    p.add_argument("--mergees", type=int, nargs="+", required=True)
    p.add_argument("--strategies", nargs="+", default=["mm-bsgd"], choices=merge.STRATEGIES)
    p.add_argument("--seeds", type=int, nargs="+", help="explicit seed list")
    p.add_argument("--repetitions", type=int, default=1, help="seeds 1..N when --seeds is absent")
    p.add_argument("--name", help="dataset column value (default: training file stem)")
    p.add_argument("--out", required=True, help="CSV file; existing rows are skipped")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (timing columns become unreliable)")
    return parser


def _hyper(args):
    """Resolve C / lambda / gamma from the flags and an optional preset."""
    C, gamma = args.C, args.gamma
    if args.preset:
        values = preset(args.preset)
        C = values["C"] if C is None and args.lam is None else C
        gamma = values["gamma"] if gamma is None else gamma
    if gamma is None:
        raise UsageError("--gamma is required unless --preset is given")
    if C is None and args.lam is None:
        raise UsageError("one of --C, --lambda or --preset is required")
    if C is not None and args.lam is not None:
        raise UsageError("--C and --lambda are mutually exclusive")
    return C, args.lam, gamma


def _load_data(args, seed):
    """Dense ``(X_train, y_train, X_eval, y_eval)`` with aligned feature counts."""
    train_set = load_svmlight(resolve_path(args.data))
    test_set = None
    if args.test:
        test_set = load_svmlight(resolve_path(args.test))
    elif args.split is not None:
        train_set, test_set = split(train_set, args.split, seed)
    d = max(train_set.max_feature_index, test_set.max_feature_index if test_set else 0)
    X, y = train_set.to_arrays(d)
    if test_set is None:
        X_eval, y_eval = X, y
    else:
        X_eval, y_eval = test_set.to_arrays(d)
    if args.scale:
        X, X_eval = minmax_scale(X, X_eval)
    return X, y, X_eval, y_eval


def _config(args, budget, mergees, strategy, seed):
    C, lam, gamma = _hyper(args)
    return TrainConfig(
        gamma=gamma, budget=budget, lam=lam, C=C, mergees=mergees, strategy=strategy,
        epochs=args.epochs, seed=seed, gs_tol=args.gs_tol, gd_tol=args.gd_tol,
        gd_max_iter=args.gd_max_iter, gd_refine=args.gd_refine,
    ).validate()


def cmd_train(args):
    config = _config(args, args.budget, args.mergees, args.strategy, args.seed)
    X, y, X_eval, y_eval = _load_data(args, args.seed)
    model, report = train(X, y, config)
    report.test_accuracy = evaluate_accuracy(model, X_eval, y_eval)
    if args.model_out:
        model.save(args.model_out)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_csv())
    print(report.pretty())
    if not (args.test or args.split is not None):
        print("(accuracy measured on the training data)")
    return 0


def cmd_eval(args):
    data = load_svmlight(resolve_path(args.data))
    model = BudgetedModel.load(args.model)
    X, y = data.to_arrays(max(data.max_feature_index, model.n_features))
    acc = evaluate_accuracy(model, X, y)
    counts = confusion_counts(model, X, y)
    print(f"accuracy  {100 * acc:.2f}%  ({counts['tp'] + counts['tn']}/{len(y)})")
    print("tp {tp}  fp {fp}  tn {tn}  fn {fn}".format(**counts))
    return 0


def _sweep_run(args, name, budget, mergees, strategy, seed):
    config = _config(args, budget, mergees, strategy, seed)
    X, y, X_eval, y_eval = _load_data(args, seed)
    model, report = train(X, y, config)
    total = report.total_train_seconds
    return {
        "dataset": name,
        "B": budget,
        "M": mergees,
        "strategy": strategy,
        "seed": seed,
        "accuracy": repr(evaluate_accuracy(model, X_eval, y_eval)),
        "total_seconds": repr(total),
        "merge_fraction": repr(report.merge_fraction if total > 0 else 0.0),
        "avg_gradient_error": repr(report.avg_gradient_error),
        "final_sv_count": report.final_sv_count,
    }


def _done_keys(path):
    if not os.path.exists(path):
        return set()
    with open(path, newline="", encoding="utf-8") as fh:
        return {tuple(row[k] for k in SWEEP_KEY) for row in csv.DictReader(fh)}


def sweep_grid(args):
    """Valid ``(B, M, strategy, seed)`` combinations; pair strategies only take M = 2."""
    seeds = args.seeds or list(range(1, args.repetitions + 1))
    grid = []
    for strategy in args.strategies:
        for budget in args.budgets:
            for mergees in args.mergees:
                if strategy in ("merge", "removal") and mergees != 2:
                    continue
                grid.extend((budget, mergees, strategy, s) for s in seeds)
    return grid


def cmd_sweep(args):
    if args.repetitions < 1:
        raise UsageError("--repetitions must be at least 1")
    _hyper(args)
    name = args.name or os.path.basename(args.data).split(".")[0]
    done = _done_keys(args.out)
    todo = [
        job for job in sweep_grid(args)
        if tuple(str(v) for v in (name, *job)) not in done
    ]
    # fail fast on an invalid combination before any run starts
    for budget, mergees, strategy, seed in todo:
        _config(args, budget, mergees, strategy, seed)
    fresh = not os.path.exists(args.out) or os.path.getsize(args.out) == 0
    with open(args.out, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        if fresh:
            writer.writeheader()
        if args.jobs > 1:
            print("warning: parallel runs share the machine; timing columns are unreliable", file=sys.stderr)
            with ProcessPoolExecutor(args.jobs) as pool:
                futures = [pool.submit(_sweep_run, args, name, *job) for job in todo]
                for fut in futures:
                    writer.writerow(fut.result())
                    fh.flush()
        else:
            for job in todo:
                row = _sweep_run(args, name, *job)
                writer.writerow(row)
                fh.flush()
                print(", ".join(f"{k}={row[k]}" for k in ("B", "M", "strategy", "seed", "accuracy")))
    print(f"{len(todo)} runs written, {len(sweep_grid(args)) - len(todo)} skipped")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (BudgetSVMError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
