"""Command-line pipeline: generate, train, evaluate, report.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import data, report as report_mod, synthgen, trainer
from .errors import ConfigError, DataError, NumericError
from .metrics import evaluate_report
from .model import load_checkpoint


class _Parser(argparse.ArgumentParser):
    # usage problems (including unknown flags) must exit with code 1
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="pairsurv",
        description="Pairwise concordance-trained competing-risks survival models.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser(
        "generate",
        help="write a synthetic competing-risks cohort CSV plus sidecars",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    gen.add_argument("--n", type=int, default=30_000, help="number of subjects")
    gen.add_argument("--censor-frac", type=float, default=0.5,
                     help="fraction of subjects to right-censor")
    gen.add_argument("--seed", type=int, default=0, help="generator seed")
    gen.add_argument("--k", type=int, default=30,
                     help="discretization grid size recorded in the sidecar")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.set_defaults(func=_cmd_generate)

    tr = sub.add_parser(
        "train",
        help="run cross-validated training and write a run directory",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    tr.add_argument("--data", required=True, help="input data CSV")
    tr.add_argument("--schema", required=True, help="feature schema sidecar")
    tr.add_argument("--config", default=None,
                    help="JSON file overriding training defaults")
    tr.add_argument("--out-dir", required=True, help="run directory to create")
    tr.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    tr.add_argument("--k", type=int, default=30, help="discretization grid size")
    tr.add_argument("--full-budget", action="store_true",
                    help="train for the full 100K iterations instead of the default")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser(
        "evaluate",
        help="score a checkpoint on a data CSV and write a report CSV",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    ev.add_argument("--data", required=True, help="input data CSV")
    ev.add_argument("--checkpoint", required=True, help="model checkpoint (.npz)")
    ev.add_argument("--out", required=True, help="output report CSV")
    ev.add_argument("--schema", default=None,
                    help="feature schema sidecar (default: <data>.schema)")
    ev.add_argument("--reps", type=int, default=1000, help="bootstrap replicates")
    ev.add_argument("--level", type=float, default=0.95, help="confidence level")
    ev.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    ev.set_defaults(func=_cmd_evaluate)

    rep = sub.add_parser(
        "report",
        help="print the run summary table and render figures",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    rep.add_argument("--run-dir", required=True, help="run directory from train")
    rep.set_defaults(func=_cmd_report)
    return parser


def _cmd_generate(args) -> int:
    config = synthgen.SynthConfig(
        n_subjects=args.n,
        censor_fraction=args.censor_frac,
        seed=args.seed,
        k=args.k,
    )
    summary = synthgen.write_cohort(args.out, config)
    censored = summary["censored"]
    n = summary["n_subjects"]
    causes = ", ".join(
        f"cause {m}: {c}" for m, c in sorted(summary["cause_counts"].items())
    )
    print(
        f"wrote {n} subjects to {args.out} "
        f"({censored} censored, {100.0 * censored / n:.1f}%; {causes})"
    )
    return 0


def _cmd_train(args) -> int:
    if args.config is not None:
        config = trainer.load_train_config(args.config)
    else:
        config = trainer.TrainConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.full_budget:
        config = dataclasses.replace(config, iterations=100_000)
    dataset = data.load_dataset(args.data, args.schema, k=args.k)
    result = trainer.run_cv(dataset, config, out_dir=args.out_dir)
    for fold in result.folds:
        cells = ", ".join(
            f"cause {row.cause}: {row.point:.3f}" for row in fold.report.causes
        )
        print(f"fold {fold.fold}: {cells}")
    for agg in result.aggregate:
        if agg.kind == "mean":
            print(
                f"mean cause {agg.cause}: "
                + report_mod.format_point_interval(agg.point, agg.lower, agg.upper)
            )
    print(f"run directory: {args.out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.grid is None:
        raise DataError(
            f"checkpoint {args.checkpoint} lacks the training time grid"
        )
    schema_path = args.schema if args.schema is not None else f"{args.data}.schema"
    dataset = data.load_dataset(
        args.data,
        schema_path,
        num_causes=ckpt.model.config.num_causes,
        grid=ckpt.grid,
    )
    expected = ckpt.model.config.input_dim
    if dataset.n_features != expected:
        raise DataError(
            f"covariate dimension mismatch: checkpoint expects {expected} "
            f"features, data has {dataset.n_features}"
        )
    if ckpt.feature_names is not None and dataset.feature_names != ckpt.feature_names:
        raise DataError(
            "encoded feature columns do not match the checkpoint: "
            f"expected {ckpt.feature_names}, found {dataset.feature_names}"
        )
    cif = ckpt.model.predict_cif(dataset.x)
    rep = evaluate_report(
        dataset, cif, reps=args.reps, level=args.level, seed=args.seed
    )
    rep.write_csv(args.out)
    for row in rep.causes:
        print(
            f"cause {row.cause}: "
            + report_mod.format_point_interval(row.point, row.lower, row.upper)
        )
    return 0


def _cmd_report(args) -> int:
    report_mod.check_run_dir(args.run_dir)
    rows = report_mod.read_report_rows(os.path.join(args.run_dir, "report.csv"))
    print(report_mod.summary_table(rows))
    for path in report_mod.render_figures(args.run_dir):
        print(f"figure: {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
