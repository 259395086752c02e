"""Command-line entry point: ``vqcbench <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (
    AGGREGATED,
    DEFAULT_LAYERS,
    DEFAULT_THRESHOLD,
    ConfigError,
    DatasetRef,
    aggregate,
    auto_select,
    best_worst_report,
    export_results,
    format_report,
    load_results_dir,
    load_sweep_config,
    run_sweep,
)
from .data import BUNDLED, DataError
from .encoding import (
    EncodingSpec,
    Family,
    bloch_trajectory,
    dedup_strategies,
    enumerate_angle_strategies,
    permutation_universe,
    write_trajectory_csv,
)
from .train import TrainConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; keep exit code 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_sweep(args) -> int:
    config = load_sweep_config(args.config)
    out = Path(args.out or config.output or "results")
    total = []

    def progress(job, result, err):
        total.append(job)
        status = "error" if err else f"test acc {result.test_metrics['accuracy']:.4f}"
        print(f"[{len(total)}] {job.key} r{job.repetition}: {status}", file=sys.stderr)

    outcome = run_sweep(config, out, resume=args.resume, progress=None if args.quiet else progress)
    if outcome.skipped:
        print(f"resumed: {outcome.skipped} existing run(s) reused", file=sys.stderr)
    if outcome.results:
        aggs = aggregate(outcome.results)
        reports = best_worst_report(aggs)
        export_results(out, outcome.results, aggs, reports, config, outcome.errors)
        print(format_report(reports))
    for job, err in outcome.errors:
        print(f"FAILED {job.key} r{job.repetition}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if outcome.errors else EXIT_OK


def _cmd_report(args) -> int:
    if args.metric not in AGGREGATED:
        raise ConfigError(f"unknown metric {args.metric!r}; choose from {', '.join(AGGREGATED)}")
    try:
        results = load_results_dir(args.input)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None
    reports = best_worst_report(aggregate(results), args.metric)
    export_results(args.input, results, reports=reports, formats=("report",))
    print(format_report(reports))
    return EXIT_OK


def _cmd_trajectory(args) -> int:
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    if args.strategy == "all":
        specs = enumerate_angle_strategies()
    else:
        try:
            specs = [EncodingSpec.parse(args.strategy)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if specs[0].family != Family.ANGLE:
            raise ConfigError(f"{args.strategy} is not an angle encoding")
    write_trajectory_csv(args.out, {s.name: bloch_trajectory(s, args.points) for s in specs})
    print(f"wrote {len(specs) * args.points} samples to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_auto_select(args) -> int:
    if args.dataset in BUNDLED and not Path(args.dataset).exists():
        ref = DatasetRef(args.dataset)
    else:
        label = args.label_column or _last_header_column(args.dataset)
        ref = DatasetRef(Path(args.dataset).stem, args.dataset, label, args.delimiter)
    tc = TrainConfig(epochs=args.epochs)
    result = auto_select(
        ref,
        budget=args.budget,
        threshold=args.threshold,
        layer_grid=tuple(args.layers),
        repetitions=args.repetitions,
        train=tc,
        base_seed=args.seed,
        num_qubits=args.qubits,
    )
    for s in result.stages:
        score = "n/a" if s.best_score is None else f"{s.best_score:.6f}"
        print(f"stage {s.stage}: {len(s.encodings)} encoding(s), {s.runs} run(s), stage best {s.best_key} {score}: {s.decision}")
    summary = {
        "recommended": result.config.key if result.config else None,
        "score": result.score,
        "truncated": result.truncated,
        "runs_used": result.runs_used,
    }
    print(json.dumps(summary))
    return EXIT_OK


def _last_header_column(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not header:
        raise DataError(f"{path}: file is empty")
    return header.split(",")[-1].strip()


def _cmd_dedup(args) -> int:
    kept = dedup_strategies(permutation_universe())
    for spec in kept:
        print(spec.name)
    print(f"{len(kept)} strategies", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vqcbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="run a configured sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: config 'output' or ./results)")
    s.add_argument("--resume", action="store_true", help="reuse existing run files")
    s.add_argument("--quiet", action="store_true", help="no per-run progress lines")
    s.set_defaults(func=_cmd_sweep)

    r = sub.add_parser("report", help="best/worst table from a sweep directory")
    r.add_argument("--metric", default="accuracy")
    r.add_argument("--in", dest="input", required=True)
    r.set_defaults(func=_cmd_report)

    t = sub.add_parser("trajectory", help="export Bloch trajectories as CSV")
    t.add_argument("--strategy", required=True, help="encoding name or 'all'")
    t.add_argument("--points", type=int, default=50)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_trajectory)

    a = sub.add_parser("auto-select", help="staged encoding selection")
    a.add_argument("--dataset", required=True, help="CSV path or bundled name (wine, diabetes)")
    a.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    a.add_argument("--label-column", help="default: last header column")
    a.add_argument("--delimiter", default=",")
    a.add_argument("--budget", type=int, help="maximum training runs (default: all stages)")
    a.add_argument("--layers", type=int, nargs="+", default=list(DEFAULT_LAYERS))
    a.add_argument("--repetitions", type=int, default=3)
    a.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    a.add_argument("--qubits", type=int)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=_cmd_auto_select)

    d = sub.add_parser("dedup", help="deduplicate the angle-encoding universe")
    d.add_argument("--universe", choices=["full"], default="full")
    d.set_defaults(func=_cmd_dedup)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
