"""
Repeated seeded experiments: configuration loading, one worker task per
repeat, aggregation and atomic emission of the result files.
"""
import json
import logging
import os
import re
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from app.config import get_settings
from app.core import ConfigError, HarnessError
from app.services.benchmarkService import get_benchmark
from app.services.metricsService import MetricsReport, NormalizationMode, aggregate, evaluate_run
from app.services.oracleService import RunHistory, finalize, open_run
from app.services.reportService import (
    build_summary,
    dumps_json,
    format_convergence,
    format_history,
    format_metrics,
)
from app.services.solverService import SolverConfig, solve
from app.utils.filename import experiment_dirname, run_filename

logger = logging.getLogger(__name__)

CONFIG_KEYS = {"benchmark_id", "solver", "repeats", "base_seed", "output_dir", "normalization_mode", "workers"}
RUN_FILE_PATTERN = re.compile(r"(history|metrics)_seed\d+\.(csv|json)|summary\.json|convergence\.csv")


def check_seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"base_seed must be a non-negative integer, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark_id: str
    solver: SolverConfig
    repeats: int = 20
    base_seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path(get_settings().RESULTS_DIR))
    normalization_mode: NormalizationMode = NormalizationMode.TABLE
    workers: Optional[int] = None

    def __post_init__(self):
        check_seed(self.base_seed)
        self.solver.check_benchmark(get_benchmark(self.benchmark_id).spec)
        if isinstance(self.repeats, bool) or not isinstance(self.repeats, int) or self.repeats < 1:
            raise ConfigError(f"repeats must be an integer >= 1, got {self.repeats!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "normalization_mode", NormalizationMode(self.normalization_mode))

    def seed_for(self, repeat: int) -> int:
        return self.base_seed + repeat

    def solver_for(self, repeat: int) -> SolverConfig:
        return SolverConfig(self.solver.name, self.solver.parameters, self.seed_for(repeat))


@dataclass(frozen=True)
class RepeatResult:
    history: RunHistory
    report: MetricsReport


@dataclass(frozen=True)
class ExperimentResult:
    output_dir: Path
    summary: dict
    files: tuple[str, ...]
    results: tuple[RepeatResult, ...]


def load_experiment_config(path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional JSON document and flag overrides.

    Overrides set to None are ignored. `parameters` in the overrides is merged
    into the solver parameters of the document. Without an output_dir the
    results go to RESULTS_DIR/<benchmark>-<solver>-base<seed>.

    Raises:
        ConfigError: unreadable document, unknown keys or any invalid value
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must be a JSON object")
        unknown = sorted(set(data) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    solver = data.get("solver", {})
    if isinstance(solver, str):
        solver = {"name": solver}
    if not isinstance(solver, dict):
        raise ConfigError("solver must be a name or an object with name and parameters")
    solver_name = overrides.pop("solver", None) or solver.get("name")
    parameters = dict(solver.get("parameters", {}))
    parameters.update(overrides.pop("parameters", None) or {})
    data.pop("solver", None)
    data.update({key: value for key, value in overrides.items() if value is not None})

    if not data.get("benchmark_id"):
        raise ConfigError("benchmark_id is required")
    if not solver_name:
        raise ConfigError("solver name is required")
    base_seed = check_seed(data.get("base_seed", 0))
    if not data.get("output_dir"):
        dirname = experiment_dirname(str(data["benchmark_id"]), str(solver_name), base_seed)
        data["output_dir"] = Path(get_settings().RESULTS_DIR) / dirname
    try:
        solver_config = SolverConfig(solver_name, parameters, base_seed)
        return ExperimentConfig(solver=solver_config, **data)
    except HarnessError as e:
        raise ConfigError(e.message) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid config: {e}") from None


def execute_repeat(config: ExperimentConfig, repeat: int) -> RepeatResult:
    seed = config.seed_for(repeat)
    run = open_run(config.benchmark_id, seed)
    solver, incumbent = solve(config.solver_for(repeat), run)
    history = finalize(run, incumbent, solver_name=solver.name)
    surrogate = solver.fit_surrogate(history) if solver.exposes_surrogate else None
    report = evaluate_run(history, surrogate, config.normalization_mode)
    return RepeatResult(history, report)


def _render(config: ExperimentConfig, results: list[RepeatResult]) -> tuple[dict, dict[str, str]]:
    reports = [result.report for result in results]
    histories = [result.history for result in results]
    budget = get_benchmark(config.benchmark_id).spec.budget
    aggregated = aggregate(reports, [h.best_trace for h in histories], budget)
    summary = build_summary(
        config.benchmark_id,
        {"name": config.solver.name, "parameters": config.solver.parameters},
        config.base_seed,
        config.normalization_mode,
        reports,
        aggregated,
    )
    files = {}
    for result in results:
        seed = result.history.seed
        files[run_filename("history", seed, "csv")] = format_history(result.history)
        files[run_filename("metrics", seed, "json")] = format_metrics(result.report)
    files["summary.json"] = dumps_json(summary)
    files["convergence.csv"] = format_convergence(histories, budget)
    return summary, files


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Execute every repeat on a worker pool and write the result files.

    Files are first written to a staging directory next to the output
    directory and moved into place only once all of them exist; a failure
    leaves no partial output behind. Result files of an earlier experiment in
    the same directory are removed, other files are left alone.
    """
    workers = min(get_settings().worker_count(config.workers), config.repeats)
    logger.info(
        f"Running {config.solver.name} on {config.benchmark_id}: {config.repeats} repeats, "
        f"base seed {config.base_seed}, {workers} worker(s)"
    )
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="repeat") as pool:
        results = list(pool.map(lambda r: execute_repeat(config, r), range(config.repeats)))

    summary, files = _render(config, results)

    output_dir = config.output_dir
    output_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=output_dir.parent))
    moved: list[Path] = []
    try:
        for name, text in files.items():
            with open(staging / name, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        output_dir.mkdir(parents=True, exist_ok=True)
        for stale in output_dir.iterdir():
            if stale.name not in files and RUN_FILE_PATTERN.fullmatch(stale.name):
                stale.unlink()
        for name in files:
            target = output_dir / name
            os.replace(staging / name, target)
            moved.append(target)
    except OSError:
        for target in moved:
            target.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    logger.info(f"Wrote {len(files)} files to {output_dir}")
    return ExperimentResult(output_dir, summary, tuple(files), tuple(results))
