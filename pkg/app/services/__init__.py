from .benchmarkService import BENCHMARKS, get_benchmark
from .oracleService import OracleRun, open_run, finalize
from .solverService import SOLVERS, SolverConfig, solve
from .experimentService import load_experiment_config, run_experiment

__all__ = [
    "BENCHMARKS",
    "get_benchmark",
    "OracleRun",
    "open_run",
    "finalize",
    "SOLVERS",
    "SolverConfig",
    "solve",
    "load_experiment_config",
    "run_experiment",
]
