"""Command-line driver.

Exit codes: 0 success, 1 unreadable input or unwritable output, 2 invalid
arguments or malformed input, 3 numerical degeneracy.  Every option can also
be set through an environment variable ``LANCE_<OPTION>`` (for example
``LANCE_ALPHA`` or ``LANCE_GRID_COUNT``); an explicit flag wins.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .applications import (
    DataFormatError,
    fit_lance,
    fit_qda,
    ingest_csv,
    ingest_ucr_timeseries,
    prediction_error_table,
    qda_classify,
)
from .cv import default_grid, lpd_cv
from .model import Hyperparameters
from .posterior import DegenerateProfileError, sample_posterior
from .simulation import (
    TrueModelSpec,
    generate_truth,
    run_estimation_study,
    run_roc_study,
    sample_data,
    summarize,
)

EXIT_IO, EXIT_VALIDATION, EXIT_DEGENERATE = 1, 2, 3

TABLES = ("roc-model1", "roc-model2", "roc-model3", "est-table1", "est-table2")
SIGNALS = {"small": (0.1, 0.4), "large": (0.4, 0.6)}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _env(name, kind, default):
    raw = os.environ.get("LANCE_" + name.upper().replace("-", "_"))
    if raw is None:
        return default
    if kind is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return kind(raw)
    except ValueError:
        raise CliError(EXIT_VALIDATION, f"bad value for LANCE_{name.upper()}: {raw!r}") from None


def _common(threads_default):
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("hyperparameters")
    g.add_argument("--alpha", type=float, default=_env("alpha", float, 0.99))
    g.add_argument("--gamma", type=float, default=_env("gamma", float, 0.1))
    g.add_argument("--c1", type=float, default=_env("c1", float, 1.0))
    g.add_argument("--c2", type=float, default=_env("c2", float, None),
                   help="penalty exponent; chosen by cross-validation when omitted")
    g.add_argument("--nu0", type=float, default=_env("nu0", float, 0.0))
    g.add_argument("--ridge-c", type=float, default=_env("ridge_c", float, 0.0))
    g.add_argument("--rmax", type=int, default=_env("rmax", int, None),
                   help="bandwidth cap (default floor(n/2) - 2)")
    g = parent.add_argument_group("cross-validation")
    g.add_argument("--grid-min", type=float, default=_env("grid_min", float, -1.5))
    g.add_argument("--grid-max", type=float, default=_env("grid_max", float, 5.0))
    g.add_argument("--grid-count", type=int, default=_env("grid_count", int, 100))
    g.add_argument("--ncv", type=int, default=_env("ncv", int, 5))
    g = parent.add_argument_group("run")
    g.add_argument("--seed", type=int, default=_env("seed", int, 0))
    g.add_argument("--threads", type=int, default=_env("threads", int, threads_default))
    g.add_argument("--center", action="store_true", default=_env("center", bool, False))
    g.add_argument("--header", action="store_true", default=_env("header", bool, False),
                   help="input CSV has a header row")
    g.add_argument("--output", default=_env("output", str, None),
                   help="output path (default stdout)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common(os.cpu_count() or 1)
    parser = argparse.ArgumentParser(prog="lance", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"lance {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="posterior-mode fit, JSON report")
    p.add_argument("--input", required=True)

    p = sub.add_parser("cv", parents=[common], help="c2 cross-validation table (CSV)")
    p.add_argument("--input", required=True)
    p.add_argument("--summary", help="also write the JSON summary here")

    p = sub.add_parser("sample", parents=[common], help="exact posterior draws (JSON)")
    p.add_argument("--input", required=True)
    p.add_argument("--draws", type=int, default=_env("draws", int, 1000))

    p = sub.add_parser("truth", parents=[common], help="simulated ground truth (JSON)")
    p.add_argument("--model", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--signal-min", type=float, default=0.1)
    p.add_argument("--signal-max", type=float, default=0.4)
    p.add_argument("--n", type=int, help="also sample n rows of data")
    p.add_argument("--data-output", help="CSV path for the sampled data")

    p = sub.add_parser("reproduce", parents=[common], help="simulation tables (CSV)")
    p.add_argument("table", choices=TABLES)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--model", type=int, choices=(1, 2, 3), default=1,
                   help="truth model for est-table runs")
    p.add_argument("--signal", choices=sorted(SIGNALS), default="small",
                   help="signal range for roc runs")
    p.add_argument("--no-cv", action="store_true", help="skip the CV operating point (roc)")

    p = sub.add_parser("predict", parents=[common], help="best linear prediction errors (CSV)")
    p.add_argument("--input", required=True, help="training CSV")
    p.add_argument("--test", required=True, help="test CSV")
    p.add_argument("--start", type=int, required=True,
                   help="first predicted column (0-based)")

    p = sub.add_parser("classify", parents=[common], help="QDA on UCR-format files (JSON)")
    p.add_argument("--input", required=True, help="training file")
    p.add_argument("--test", required=True, help="test file")
    return parser


def _hyper(args) -> Hyperparameters:
    try:
        return Hyperparameters(alpha=args.alpha, gamma=args.gamma, c1=args.c1,
                               c2=1.0 if args.c2 is None else args.c2, nu0=args.nu0,
                               rmax=args.rmax, ridge_c=args.ridge_c)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from None


def _grid(args):
    if args.grid_count < 1:
        raise CliError(EXIT_VALIDATION, "--grid-count must be at least 1")
    return default_grid(args.grid_min, args.grid_max, args.grid_count)


def _config(args, hyper) -> dict:
    cfg = dict(vars(args))
    cfg["hyperparameters"] = hyper.to_dict()
    cfg["c2_from_cv"] = args.c2 is None
    cfg["grid"] = {"min": args.grid_min, "max": args.grid_max, "count": args.grid_count}
    return cfg


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row.get(h, "") for h in header] if isinstance(row, dict) else row)
    return buf.getvalue()


def _load(args, path=None):
    return ingest_csv(path or args.input, header=args.header)


def _cv_summary(cv) -> dict | None:
    if cv is None:
        return None
    return {"c2_best": cv.c2_best, "n_profile_builds": cv.n_profile_builds,
            "excluded_columns": list(cv.excluded)}


def cmd_fit(args) -> int:
    hyper = _hyper(args)
    t0 = time.perf_counter()
    data = _load(args)
    X = data.center().values if args.center else data.values
    t1 = time.perf_counter()
    fit, cv = fit_lance(X, hyper, args.c2, _grid(args), args.ncv, args.seed, args.threads)
    t2 = time.perf_counter()
    report = {
        "lance_version": __version__,
        "command": "fit",
        "config": _config(args, fit.hyper),
        "fit": fit.to_dict(),
        "cv": _cv_summary(cv),
        "timings": {"read": t1 - t0, "fit_total": t2 - t1, **fit.timings},
    }
    _emit(_json(report), args.output)
    if fit.failed:
        print(f"lance: degenerate columns {fit.failed}", file=sys.stderr)
        return EXIT_DEGENERATE
    return 0


def cmd_cv(args) -> int:
    hyper = _hyper(args)
    X = _load(args).values
    if args.center:
        X = X - X.mean(axis=0)
    cv = lpd_cv(X, _grid(args), hyper, n_cv=args.ncv, seed=args.seed, threads=args.threads)
    _emit(_csv(["c2", "lpd"], cv.table()), args.output)
    summary = {"lance_version": __version__, "command": "cv", "config": _config(args, hyper),
               **_cv_summary(cv)}
    if args.summary:
        _emit(_json(summary), args.summary)
    elif args.output is not None:
        sys.stdout.write(_json(summary))
    return 0


def cmd_sample(args) -> int:
    hyper = _hyper(args)
    X = _load(args).values
    if args.center:
        X = X - X.mean(axis=0)
    cv = None
    if args.c2 is None:
        cv = lpd_cv(X, _grid(args), hyper, n_cv=args.ncv, seed=args.seed, threads=args.threads)
        hyper = hyper.replace(c2=cv.c2_best)
    draws = sample_posterior(X, hyper, args.draws, args.seed, args.threads)
    out = {
        "lance_version": __version__,
        "command": "sample",
        "config": _config(args, hyper),
        "cv": _cv_summary(cv),
        "bandwidths": draws.k.tolist(),
        "variances": draws.d.tolist(),
        "coefficients_lag_order": [a.tolist() for a in draws.a],
    }
    _emit(_json(out), args.output)
    return 0


def cmd_truth(args) -> int:
    hyper = _hyper(args)
    try:
        spec = TrueModelSpec(args.model, args.p, (args.signal_min, args.signal_max), args.seed)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from None
    truth = generate_truth(spec)
    out = {
        "lance_version": __version__,
        "command": "truth",
        "config": _config(args, hyper),
        "bandwidths": truth.bandwidths.tolist(),
        "coefficients": [b.tolist() for b in truth.bands],
        "variances": truth.d.tolist(),
    }
    _emit(_json(out), args.output)
    if args.n:
        X = sample_data(truth, args.n, np.random.SeedSequence(args.seed, spawn_key=(1,)))
        buf = io.StringIO()
        np.savetxt(buf, X, delimiter=",", fmt="%.17g")
        _emit(buf.getvalue(), args.data_output)
    return 0


def cmd_reproduce(args) -> int:
    hyper = _hyper(args)
    grid = _grid(args)
    if args.table.startswith("est"):
        signal = SIGNALS["small" if args.table == "est-table1" else "large"]
        n = args.n or 300
        rows = run_estimation_study(args.model, n, args.p, signal, args.replicates, args.seed,
                                    hyper, grid, args.ncv, args.threads)
        keys = ["c2", "sensitivity", "specificity", "frobenius", "spectral", "linf", "max",
                "exact_bandwidth_rate"]
        header = ["row_type", "replicate", "model", "n", "p", "signal_min", "signal_max", *keys]
        table = [{"row_type": "replicate", **r} for r in rows]
        agg = summarize(rows, keys)
        common = {"model": args.model, "n": n, "p": args.p,
                  "signal_min": signal[0], "signal_max": signal[1], "replicate": ""}
        table.append({"row_type": "mean", **common, **{k: agg[k][0] for k in keys}})
        table.append({"row_type": "sd", **common, **{k: agg[k][1] for k in keys}})
    else:
        model_id = int(args.table[-1])
        signal = SIGNALS[args.signal]
        n = args.n or 100
        curve, dots = run_roc_study(model_id, n, args.p, signal, args.replicates, args.seed,
                                    hyper, grid, args.ncv, args.threads, with_cv=not args.no_cv)
        header = ["row_type", "replicate", "model", "n", "p", "signal_min", "signal_max",
                  "c2", "sensitivity", "specificity"]
        common = {"model": model_id, "n": n, "p": args.p,
                  "signal_min": signal[0], "signal_max": signal[1]}
        table = [{"row_type": "curve", **common, **r} for r in curve]
        table += [{"row_type": "cv", **common, **r} for r in dots]
    _emit(_csv(header, table), args.output)
    return 0


def cmd_predict(args) -> int:
    hyper = _hyper(args)
    train = _load(args).values
    test = _load(args, args.test).values
    if train.shape[1] != test.shape[1]:
        raise CliError(EXIT_VALIDATION, "train and test files have different column counts")
    if not 1 <= args.start < train.shape[1]:
        raise CliError(EXIT_VALIDATION, f"--start must lie in 1..{train.shape[1] - 1}")
    mu = train.mean(axis=0)
    # test rows are shifted by the training means
    fit, cv = fit_lance(train - mu, hyper, args.c2, _grid(args), args.ncv, args.seed,
                        args.threads)
    table = prediction_error_table(fit.model, np.zeros_like(mu), test - mu, args.start)
    rows = [(int(j), float(v)) for j, v in zip(table.columns, table.pe)]
    _emit(_csv(["column", "pe"], rows + [("mean", table.mean)]), args.output)
    if args.output is not None:
        sys.stdout.write(_json({"lance_version": __version__, "command": "predict",
                                "config": _config(args, fit.hyper), "cv": _cv_summary(cv),
                                "mean_pe": table.mean}))
    return 0


def cmd_classify(args) -> int:
    hyper = _hyper(args)
    y_train, train = ingest_ucr_timeseries(args.input)
    y_test, test = ingest_ucr_timeseries(args.test)
    if train.p != test.p:
        raise CliError(EXIT_VALIDATION, "train and test series have different lengths")
    X_train, X_test = train.values, test.values
    if args.center:
        mu = X_train.mean(axis=0)
        X_train, X_test = X_train - mu, X_test - mu
    model = fit_qda(X_train, y_train, hyper, args.c2, _grid(args), args.ncv, args.seed,
                    args.threads)
    pred, _ = qda_classify(model, X_test)
    out = {
        "lance_version": __version__,
        "command": "classify",
        "config": _config(args, hyper),
        "classes": model.classes.tolist(),
        "train_counts": model.counts.tolist(),
        "test_error": float(np.mean(pred != y_test)),
        "predictions": pred.tolist(),
    }
    _emit(_json(out), args.output)
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "cv": cmd_cv,
    "sample": cmd_sample,
    "truth": cmd_truth,
    "reproduce": cmd_reproduce,
    "predict": cmd_predict,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"lance: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateProfileError as exc:
        print(f"lance: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DataFormatError as exc:
        print(f"lance: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"lance: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"lance: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
