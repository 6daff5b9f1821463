"""
File formats written by experiments and read back by the metrics command:
history CSV, per-run metrics JSON, summary JSON and convergence CSV.
"""
import csv
import io
import json
import math
import re
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from app.core import (
    ArgumentError,
    DimensionMismatchError,
    DomainError,
    HistoryParseError,
    PointOptimum,
)
from app.services.benchmarkService import Benchmark, get_benchmark
from app.services.metricsService import MetricsReport, NormalizationMode, cost_grid, resample_trace
from app.services.oracleService import EvaluationRecord, RunHistory, build_best_trace

FIXED_COLUMNS = ("index", "level", "cost", "cumulative_cost", "off_budget")
SEED_PATTERN = re.compile(r"seed(\d+)")


def _number(value: float) -> str:
    return f"{value:.17g}"


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def dumps_json(data) -> str:
    return json.dumps(_json_safe(data), indent=2, allow_nan=False) + "\n"


def history_header(dimension: int) -> list[str]:
    return [*FIXED_COLUMNS, *(f"x_{k}" for k in range(1, dimension + 1)), "value"]


def format_history(history: RunHistory) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(history_header(history.dimension))
    for record in history.records:
        writer.writerow([
            record.index,
            record.level,
            _number(record.cost),
            _number(record.cumulative_cost),
            int(record.off_budget),
            *(_number(v) for v in record.point),
            _number(record.value),
        ])
    return buffer.getvalue()


def seed_from_name(name: str) -> Optional[int]:
    match = SEED_PATTERN.search(Path(name).stem)
    return int(match.group(1)) if match else None


def parse_history(text: str, benchmark_id: str, seed: int = 0) -> RunHistory:
    """
    Rebuild a RunHistory from history CSV text. The last off-budget row, if
    any, is the incumbent.

    Raises:
        DimensionMismatchError: header has a different number of x columns
        HistoryParseError: any malformed line, with its 1-based number
    """
    benchmark: Benchmark = get_benchmark(benchmark_id)
    spec = benchmark.spec
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise HistoryParseError("missing header", 1)

    header = lines[0].rstrip("\r").split(",")
    if tuple(header[:len(FIXED_COLUMNS)]) != FIXED_COLUMNS or header[-1] != "value":
        raise HistoryParseError(f"header must start with {','.join(FIXED_COLUMNS)} and end with value", 1)
    dimension = len(header) - len(FIXED_COLUMNS) - 1
    if dimension != spec.dimension:
        raise DimensionMismatchError(
            f"History has {dimension} design columns but {spec.id} has D = {spec.dimension}"
        )
    if header != history_header(dimension):
        raise HistoryParseError("design columns must be x_1..x_D", 1)

    records: list[EvaluationRecord] = []
    previous_cumulative = 0.0
    for number, line in enumerate(lines[1:], start=2):
        fields = line.rstrip("\r").split(",")
        if len(fields) != len(header):
            raise HistoryParseError(f"expected {len(header)} fields, found {len(fields)}", number)
        try:
            index = int(fields[0])
            level = int(fields[1])
            cost, cumulative = float(fields[2]), float(fields[3])
            off_budget = {"0": False, "1": True}[fields[4]]
            point = tuple(float(v) for v in fields[5:-1])
            value = float(fields[-1])
        except (ValueError, KeyError):
            raise HistoryParseError("unreadable field", number) from None
        if index != len(records):
            raise HistoryParseError(f"index {index} out of sequence", number)
        try:
            expected_cost = spec.cost(level)
            spec.bounds.validate(point)
        except (ArgumentError, DomainError) as e:
            raise HistoryParseError(e.message, number) from None
        if cost != expected_cost:
            raise HistoryParseError(f"cost {cost} does not match level {level} cost {expected_cost}", number)
        if cumulative < previous_cumulative or cumulative > spec.budget + 1e-9:
            raise HistoryParseError(f"cumulative cost {cumulative} is inconsistent", number)
        previous_cumulative = cumulative
        records.append(EvaluationRecord(
            index=index,
            level=level,
            point=point,
            value=value,
            cost=cost,
            cumulative_cost=cumulative,
            timestamp=index,
            off_budget=off_budget,
        ))

    incumbent = None
    incumbent_value = None
    off_budget_records = [record for record in records if record.off_budget]
    if off_budget_records:
        incumbent = off_budget_records[-1].point
        incumbent_value = off_budget_records[-1].value
    return RunHistory(
        benchmark_id=spec.id,
        seed=seed,
        records=tuple(records),
        best_trace=tuple(build_best_trace(records)),
        incumbent=incumbent,
        incumbent_value=incumbent_value,
    )


def read_history(path: Union[str, Path], benchmark_id: str, seed: Optional[int] = None) -> RunHistory:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError:
        raise HistoryParseError("file is not valid UTF-8", 1) from None
    if seed is None:
        seed = seed_from_name(path.name) or 0
    return parse_history(text, benchmark_id, seed)


def format_metrics(report: MetricsReport) -> str:
    return dumps_json(report.to_dict())


def read_metrics(path: Union[str, Path]) -> MetricsReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    incumbent = data.get("incumbent")
    return MetricsReport(
        benchmark_id=data["benchmark_id"],
        seed=data.get("seed"),
        e_rmse=data.get("e_rmse"),
        e_x=data.get("e_x"),
        e_f=data.get("e_f"),
        e_t=data.get("e_t"),
        normalization_mode=NormalizationMode(data.get("normalization_mode", "table")),
        high_fidelity_evidence=data.get("high_fidelity_evidence", True),
        incumbent=tuple(incumbent) if incumbent is not None else None,
        incumbent_value=data.get("incumbent_value"),
        total_cost=data.get("total_cost", 0.0),
    )


def build_summary(
    benchmark_id: str,
    solver: dict,
    base_seed: int,
    normalization_mode: NormalizationMode,
    reports: Sequence[MetricsReport],
    aggregated: dict,
) -> dict:
    return {
        "benchmark_id": benchmark_id,
        "solver": solver,
        "repeats": len(reports),
        "base_seed": base_seed,
        "normalization_mode": NormalizationMode(normalization_mode).value,
        "metrics": aggregated["metrics"],
        "runs_without_high_fidelity_evidence": aggregated["runs_without_high_fidelity_evidence"],
        "runs": [
            {
                "seed": report.seed,
                "e_x": report.e_x,
                "e_f": report.e_f,
                "e_t": report.e_t,
                "e_rmse": report.e_rmse,
            }
            for report in reports
        ],
    }


def format_convergence(histories: Sequence[RunHistory], budget: float) -> str:
    """Median and per-seed best level-1 value on the common cost grid; empty cell = no level-1 value yet."""
    grid = cost_grid(budget)
    curves = np.array([resample_trace(history.best_trace, budget) for history in histories])
    median = np.median(curves, axis=0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["cost", "median", *(f"seed_{history.seed}" for history in histories)])

    def cell(value: float) -> str:
        return _number(value) if math.isfinite(value) else ""

    for k, cost in enumerate(grid):
        writer.writerow([_number(cost), cell(median[k]), *(cell(curve[k]) for curve in curves)])
    return buffer.getvalue()


def read_convergence(path: Union[str, Path]) -> dict[str, list[float]]:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], rows[1:]
    return {
        name: [float(row[k]) if row[k] else math.inf for row in body]
        for k, name in enumerate(header)
    }


def benchmark_row(benchmark: Benchmark) -> dict:
    spec = benchmark.spec
    reference = spec.reference
    location = reference.optimum_location
    return {
        "id": spec.id,
        "family": benchmark.family.name,
        "dimension": spec.dimension,
        "budget": spec.budget,
        "costs": list(spec.fidelity_costs),
        "noisy": benchmark.noisy,
        "x_star": list(location.coords) if isinstance(location, PointOptimum) else location.describe(),
        "x_star_text": location.describe(),
        "f_star": reference.f_star,
        "f_min": reference.f_min,
        "f_max": reference.f_max,
    }


def format_benchmark_table(rows: Sequence[dict]) -> str:
    lines = [f"{'ID':<6} {'D':>2} {'budget':>6}  {'costs':<40} {'f*':>12} {'f_min':>12} {'f_max':>12}  x*"]
    for row in rows:
        costs = ", ".join(f"{c:.5E}" for c in row["costs"])
        lines.append(
            f"{row['id']:<6} {row['dimension']:>2} {row['budget']:>6g}  {costs:<40} "
            f"{row['f_star']:>12.7g} {row['f_min']:>12.5g} {row['f_max']:>12.5g}  {row['x_star_text']}"
        )
    return "\n".join(lines) + "\n"


