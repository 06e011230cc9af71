"""Command-line entry point: ``narxqoe <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import ForestConfig, select_features
from .dataset import (
    CANONICAL_SCHEMA,
    SYNTH_SCHEMA,
    FeatureSchema,
    load_csv,
    load_table,
    make_folds,
    synth_narx_series,
    write_records_csv,
)
from .errors import DataError, ModelFileError, NumericalError
from .estimators import make_spec, parse_spec_list
from .metrics import FoldError, evaluate_cv
from .monitor import run_stream
from .narx import forward_closed_loop, forward_open_loop, load_model, save_model
from .numerics import derive_seed
from .training import TrainConfig, fit_on_records

log = logging.getLogger("narxqoe")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_schema(args) -> FeatureSchema:
    if getattr(args, "schema", None):
        return FeatureSchema.load(args.schema)
    if getattr(args, "features", None):
        return FeatureSchema(tuple(f.strip() for f in args.features.split(",") if f.strip()), args.target)
    return FeatureSchema(CANONICAL_SCHEMA.names, args.target)


def _train_config(args) -> TrainConfig:
    return TrainConfig(max_epochs=args.max_epochs, patience=args.patience, seed=args.seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    cfg.update(extra)
    return cfg


# --------------------------------------------------------------------------- subcommands


def cmd_select_features(args) -> int:
    table = load_table(args.data, args.target, exclude=args.exclude.split(",") if args.exclude else ())
    cfg = ForestConfig(n_trees=args.trees, seed=derive_seed(args.seed, "select"))
    schema, ranking = select_features(table, cfg, args.top_k, args.target)
    out = _out_dir(args)
    schema.save(out / "schema.json")
    ranking.write_csv(out / "importance.csv")
    _write_json(out / "run_config.json", _run_config(args))
    for name in schema.names:
        print(name)
    return EXIT_OK


def cmd_cv(args) -> int:
    schema = _resolve_schema(args)
    records = load_csv(args.data, schema, args.order_by)
    plan = make_folds(len(records), args.folds, derive_seed(args.seed, "folds"), shuffle=not args.no_shuffle)
    out = _out_dir(args)
    plan.write_csv(out / "fold_plan.csv")
    tc = _train_config(args)
    rows, summaries, failures = [], [], 0
    for text in parse_spec_list(args.models):
        spec = make_spec(text, schema, tc, args.hidden)
        try:
            rep = evaluate_cv(spec, records, plan, args.seed, args.loop)
        except FoldError as exc:
            failures += 1
            log.error("%s: %s", spec.name, exc)
            rows.append([spec.name, "", "", "", "", plan.digest, f"error: {exc}"])
            continue
        a = rep.aggregate
        rows.append([spec.name, repr(a.mse), repr(a.rmse), repr(a.pearson), a.n, plan.digest, "ok"])
        summaries.append(rep.summary())
        safe = spec.name.replace("(", "_").replace(")", "").replace(",", "_")
        rep.write_csv(out / f"folds_{safe}.csv")
        rep.write_predictions(out / f"predictions_{safe}.csv")

    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "mse", "rmse", "pearson", "n", "plan", "status"])
        w.writerows(rows)
    _write_json(out / "comparison.json", {"config": _run_config(args, plan=plan.digest), "models": summaries})

    print(f"{'Model':<16} {'MSE':>8} {'Pearson R':>10}")
    for r in rows:
        if r[-1] == "ok":
            print(f"{r[0]:<16} {float(r[1]):>8.3f} {float(r[3]):>10.3f}")
        else:
            print(f"{r[0]:<16} {r[-1]}")
    if rows and failures == len(rows):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_train(args) -> int:
    schema = _resolve_schema(args)
    records = load_csv(args.data, schema, args.order_by)
    cfg = _train_config(args)
    fit = fit_on_records(records, np.arange(len(records)), schema, args.du, args.dy, args.hidden, cfg)
    out = _out_dir(args)
    save_model(fit.model, out / "model.json")
    fit.report.write_csv(out / "train_report.csv")
    _write_json(
        out / "run_config.json",
        _run_config(
            args,
            train_origins=[int(o) for o in fit.train_origins],
            val_origins=[int(o) for o in fit.val_origins],
            stop_reason=fit.report.stop_reason,
            best_epoch=fit.report.best_epoch,
        ),
    )
    b = fit.report.best
    print(f"best epoch {fit.report.best_epoch}: train MSE {b.train_mse:.4f}, validation MSE {b.val_mse:.4f}")
    return EXIT_OK


def _predict(model, records, loop):
    if loop == "open":
        return forward_open_loop(model, records)
    return forward_closed_loop(model, records)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    schema = model.schema or _resolve_schema(args)
    records = load_csv(args.data, schema, args.order_by)
    ordinals, est = _predict(model, records, args.loop)
    out = _out_dir(args)
    with open(out / "estimates.csv", "w", encoding="utf-8") as fh:
        fh.write("ordinal,estimate\n")
        for o, e in zip(ordinals, est):
            fh.write(f"{int(o)},{float(e)!r}\n")
    return EXIT_OK


def cmd_monitor(args) -> int:
    if args.data:
        with open(args.data, encoding="utf-8") as fh:
            return run_stream(args.model, fh, sys.stdout, args.loop)
    return run_stream(args.model, sys.stdin, sys.stdout, args.loop)


def cmd_synth(args) -> int:
    records = synth_narx_series(args.n, args.seed, args.noise_sd)
    out = _out_dir(args)
    write_records_csv(records, SYNTH_SCHEMA, out / "synth.csv")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="narxqoe", description="NARX audiovisual quality (MOS) estimation")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_flags(p, schema=True):
        p.add_argument("--data", required=True)
        p.add_argument("--target", default="mos", help="MOS column name")
        if schema:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--schema", help="schema JSON from select-features")
            g.add_argument("--features", help="comma-separated feature columns")
            p.add_argument("--order-by", dest="order_by", help="sort records by this column")

    def train_flags(p):
        p.add_argument("--hidden", type=int, default=None, help="hidden nodes (default: feature count)")
        p.add_argument("--max-epochs", dest="max_epochs", type=int, default=300)
        p.add_argument("--patience", type=int, default=30)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("select-features", help="rank columns by random-forest importance")
    data_flags(p, schema=False)
    p.add_argument("--top-k", dest="top_k", type=int, default=9)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--exclude", help="comma-separated columns to ignore")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select_features)

    p = sub.add_parser("cv", help="k-fold comparison of NARX and baseline models")
    data_flags(p)
    train_flags(p)
    p.add_argument("--models", default="narx(3,0),narx(3,3),narx(4,4),mlp,ols,rf,bagging")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--loop", choices=("open", "closed"), default="open")
    p.add_argument("--no-shuffle", dest="no_shuffle", action="store_true", help="contiguous folds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("train", help="train one NARX model on a whole file")
    data_flags(p)
    train_flags(p)
    p.add_argument("--du", type=int, default=3)
    p.add_argument("--dy", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="batch MOS estimates from a trained model")
    data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--loop", choices=("open", "closed"), default="open")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("monitor", help="stream estimates from CSV lines (stdin by default)")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="replay this file instead of stdin")
    p.add_argument("--loop", choices=("open", "closed"), default="closed")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("synth", help="write the synthetic NARX fixture series")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, ModelFileError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream reader closed (e.g. piped into head)
        sys.stdout = None
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
