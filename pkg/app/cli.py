"""
Command-line front end.

    python -m app.cli list [--json]
    python -m app.cli evaluate MF1.1 --level 1 --x 0.75724876
    python -m app.cli run --benchmark MF2.1 --solver mf-screening --repeats 20 --output-dir results/mf21
    python -m app.cli metrics results/mf21/history_seed0.csv --benchmark MF2.1

Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime failure.
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.config import get_settings
from app.core import (
    ArgumentError,
    BenchmarkLookupError,
    ConfigError,
    DomainError,
    HarnessError,
)
from app.services.benchmarkService import BENCHMARKS, evaluate_uncharged
from app.services.experimentService import load_experiment_config, run_experiment
from app.services.metricsService import NormalizationMode, evaluate_run
from app.services.reportService import benchmark_row, dumps_json, format_benchmark_table, read_history
from app.services.solverService import get_solver
from app.utils.parsing import parse_parameter_assignments, parse_point

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfbench",
        description="Multifidelity optimization benchmark harness",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    listing = commands.add_parser("list", help="Show the benchmark instances")
    listing.add_argument("--json", action="store_true", help="Emit JSON instead of a table")

    evaluate = commands.add_parser("evaluate", help="Single uncharged evaluation")
    evaluate.add_argument("benchmark_id")
    evaluate.add_argument("--level", type=int, required=True, help="Fidelity level (1 = highest)")
    evaluate.add_argument("--x", required=True, help="Comma-separated design point")
    evaluate.add_argument("--seed", type=int, help="Noise seed, required for noisy benchmarks")

    run = commands.add_parser("run", help="Repeated seeded runs of one solver")
    run.add_argument("--config", help="JSON document mirroring the experiment config")
    run.add_argument("--benchmark", dest="benchmark_id", help="Benchmark id, e.g. MF2.1")
    run.add_argument("--solver", help="Solver name (see GET /experiments/solvers)")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Solver parameter")
    run.add_argument("--repeats", type=int, help="Number of seeded repeats (default 20)")
    run.add_argument("--base-seed", dest="base_seed", type=int, help="Seed of repeat 0")
    run.add_argument("--output-dir", dest="output_dir", help="Result directory (default RESULTS_DIR)")
    run.add_argument("--normalization", dest="normalization_mode", choices=[m.value for m in NormalizationMode])
    run.add_argument("--workers", type=int, help="Worker pool size (default: logical CPUs)")

    metrics = commands.add_parser("metrics", help="Recompute metrics from a stored history")
    metrics.add_argument("history_file")
    metrics.add_argument("--benchmark", dest="benchmark_id", required=True)
    metrics.add_argument("--seed", type=int, help="Run seed (default: parsed from the file name)")
    metrics.add_argument("--normalization", choices=[m.value for m in NormalizationMode], default="table")
    metrics.add_argument("--rmse", action="store_true", help="Refit the solver surrogate and report E_RMSE")
    metrics.add_argument("--solver", default="mf-screening", help="Solver whose surrogate is refitted")
    return parser


def cmd_list(args) -> int:
    rows = [benchmark_row(benchmark) for benchmark in BENCHMARKS.values()]
    if args.json:
        sys.stdout.write(dumps_json(rows))
    else:
        sys.stdout.write(format_benchmark_table(rows))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        value, cost = evaluate_uncharged(args.benchmark_id, args.level, parse_point(args.x), args.seed)
    except (ArgumentError, DomainError, BenchmarkLookupError) as e:
        logger.error(e.message)
        return EXIT_USAGE
    print(f"value {value:.10g}")
    print(f"cost {cost:.5E}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        parameters = parse_parameter_assignments(args.param)
        config = load_experiment_config(
            args.config,
            benchmark_id=args.benchmark_id,
            solver=args.solver,
            parameters=parameters,
            repeats=args.repeats,
            base_seed=args.base_seed,
            output_dir=args.output_dir,
            normalization_mode=args.normalization_mode,
            workers=args.workers,
        )
    except ArgumentError as e:
        logger.error(e.message)
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(e.message)
        return EXIT_CONFIG

    try:
        result = run_experiment(config)
    except (HarnessError, OSError) as e:
        logger.error(f"Experiment failed: {getattr(e, 'message', e)}")
        return EXIT_RUNTIME

    metrics = result.summary["metrics"]
    for name in ("e_x", "e_f", "e_t", "e_rmse"):
        stats = metrics.get(name)
        if stats:
            print(f"{name:<7} median {stats['median']:.6g}  iqr {stats['iqr']:.6g}")
    print(f"wrote {len(result.files)} files to {result.output_dir}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        history = read_history(args.history_file, args.benchmark_id, args.seed)
        surrogate = None
        if args.rmse:
            solver_cls = get_solver(args.solver)
            surrogate = solver_cls().fit_surrogate(history)
        report = evaluate_run(history, surrogate, NormalizationMode(args.normalization))
    except BenchmarkLookupError as e:
        logger.error(e.message)
        return EXIT_USAGE
    except (HarnessError, OSError) as e:
        logger.error(getattr(e, "message", str(e)))
        return EXIT_RUNTIME
    sys.stdout.write(dumps_json(report.to_dict()))
    return EXIT_OK


COMMANDS = {
    "list": cmd_list,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
    "metrics": cmd_metrics,
}


def configure_logging(verbose: bool):
    level = logging.DEBUG if verbose else getattr(logging, get_settings().LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    configure_logging(args.verbose)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
