"""Command line entry point: one subcommand per experiment.

With ``--out`` the bundle is written to disk and the experiment's figures
are rendered next to it; without it the bundle is printed as json.  Every
run needs ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .figures import render_figures
from .harness import (
    EXPERIMENTS,
    CsvFormatError,
    ExperimentConfig,
    emit,
    run_experiment,
)


def _sizes(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankmatch",
        description="Online absolute ranking experiments via maximum-likelihood matching.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, required=True,
                        help="master seed; every run draws random numbers")
    common.add_argument("--n", type=int, help="cohort size")
    common.add_argument("--trials", type=int, help="trial / stream / seed count")
    common.add_argument("--bin-width", type=float, default=0.01,
                        help="score bin width for synthetic distributions")
    common.add_argument("--quantize", type=float, dest="quantize_step",
                        help="quantization step for exam-style scores")
    common.add_argument("--tau", type=float, default=math.inf,
                        help="delayed-score reveal delay in steps (default: never)")
    common.add_argument("--top-m", type=int, help="hiring target size")
    common.add_argument("--c", type=float, default=10.0,
                        help="sparsification oversampling constant")
    common.add_argument("--k", type=int, default=4, help="group count")
    common.add_argument("--combined", choices=("f1", "f2"),
                        help="combined-score blend (default f2)")
    common.add_argument("--cohorts", type=int,
                        help="Monte Carlo cohorts for table/model estimation")
    common.add_argument("--workers", type=int, default=1,
                        help="worker processes; results do not depend on this")
    common.add_argument("--csv", dest="csv_path",
                        help="input CSV with midterm1,midterm2,final columns")
    common.add_argument("--train-count", type=int, default=141,
                        help="rows used to fit the score model")
    common.add_argument("--stream-count", type=int,
                        help="cap on streamed rows after the training split")
    common.add_argument("--sizes", type=_sizes, default=(100, 200, 400),
                        help="comma-separated benchmark sizes")
    common.add_argument("--repeats", type=int, default=5,
                        help="benchmark repeats per size")
    common.add_argument("--survival-trials", type=int, default=0,
                        help="include a feasibility/agreement check over this many trials")
    common.add_argument("--out", help="result file path")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="result file format")
    common.add_argument("--no-plot", action="store_true",
                        help="skip figure rendering next to --out")

    subcommands = parser.add_subparsers(dest="experiment", required=True)
    descriptions = {
        "exp1": "at-arrival rank deviation, i.i.d. standard Gaussian scores",
        "exp2": "at-arrival rank deviation, i.i.d. uniform scores",
        "exp-delayed": "exam-style ranking with the delayed score hidden",
        "exp-sparse": "runtime benchmark of the grouped matching solvers",
        "hire": "hire-on-predicted-top-m simulation",
        "rank": "one-shot ranking report over a CSV",
    }
    for name in EXPERIMENTS:
        subcommands.add_parser(name, parents=[common], help=descriptions[name])
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=args.experiment,
        seed=args.seed,
        n=args.n,
        trials=args.trials,
        bin_width=args.bin_width,
        quantize_step=args.quantize_step,
        tau=args.tau,
        top_m=args.top_m,
        c=args.c,
        k=args.k,
        combined=args.combined,
        cohorts=args.cohorts,
        workers=args.workers,
        train_count=args.train_count,
        stream_count=args.stream_count,
        sizes=args.sizes,
        repeats=args.repeats,
        survival_trials=args.survival_trials,
        csv_path=args.csv_path,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        bundle = run_experiment(config)
    except (CsvFormatError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.out is None:
        print(json.dumps(bundle.to_dict(), indent=2, sort_keys=True))
        return 0
    written = [emit(bundle, args.out, args.format)]
    if not args.no_plot:
        written.extend(render_figures(bundle, args.out))
    for path in written:
        print(path)
    return 0
