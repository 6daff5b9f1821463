"""
Goal-insensitive (E_RMSE) and goal-sensitive (E_x, E_f, E_t) metrics,
validation samples and cross-repeat statistics.
"""
import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from app.config import get_settings
from app.core import (
    ArgumentError,
    BenchmarkSpec,
    Bounds,
    CoordinateManifold,
    DesignPoint,
    HyperbolaManifold,
    PointOptimum,
    ReferenceValues,
    scale_to_unit,
)
from app.services.benchmarkService import Benchmark, get_benchmark
from app.services.oracleService import RunHistory, TracePoint

logger = logging.getLogger(__name__)

GRID_POINTS = {1: 1001, 2: 101, 3: 41}
LHS_POINTS_PER_DIMENSION = 1000
TRACE_RESOLUTION = 101
HYPERBOLA_GRID = 2001
METRIC_NAMES = ("e_rmse", "e_x", "e_f", "e_t")


class NormalizationMode(str, Enum):
    TABLE = "table"
    OBSERVED = "observed"


class Predictor(Protocol):
    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Predict f_1 at rows of `points`, given in design coordinates."""
        ...


@dataclass(frozen=True)
class ValidationSample:
    points: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        size = len(self.points)
        if len(self.truth) != size or len(self.predicted) != size:
            raise ArgumentError("Validation sample arrays must have equal lengths")
        if size < 2:
            raise ArgumentError("Validation sample needs at least two points")

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class MetricsReport:
    benchmark_id: str
    seed: Optional[int]
    e_rmse: Optional[float]
    e_x: Optional[float]
    e_f: Optional[float]
    e_t: Optional[float]
    normalization_mode: NormalizationMode = NormalizationMode.TABLE
    high_fidelity_evidence: bool = True
    incumbent: Optional[tuple[float, ...]] = None
    incumbent_value: Optional[float] = None
    total_cost: float = 0.0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["normalization_mode"] = self.normalization_mode.value
        data["incumbent"] = list(self.incumbent) if self.incumbent is not None else None
        return data


def _normalization_width(f_min: float, f_max: float) -> float:
    width = f_max - f_min
    if not width > 0:
        raise ArgumentError(f"Degenerate normalization: f_max {f_max} must exceed f_min {f_min}")
    return width


def rmse_error(sample: ValidationSample, norm: tuple[float, float]) -> float:
    width = _normalization_width(*norm)
    residual = np.asarray(sample.truth, dtype=float) - np.asarray(sample.predicted, dtype=float)
    return float(np.sqrt(np.mean(residual ** 2)) / width)


def _distance_to_hyperbola(point: DesignPoint, manifold: HyperbolaManifold, bounds: Bounds) -> float:
    """Scaled distance from `point` to the parts of x_1*x_2 = c inside the box, minimized over c."""
    lower, width = bounds.lower_array, bounds.width_array
    unit = (point - lower) / width

    def scaled_gap(x1: float, c: float) -> float:
        candidate = (np.array([x1, c / x1]) - lower) / width
        return float(np.sum((candidate - unit) ** 2))

    best = math.inf
    for c in manifold.constants:
        x1_low = max(bounds.lower[0], c / bounds.upper[1])
        x1_high = min(bounds.upper[0], c / bounds.lower[1])
        if x1_low > x1_high:
            continue
        # exact projections along each axis
        candidates = [x1 for x1 in (point[0], c / point[1]) if x1_low <= x1 <= x1_high]
        grid = np.linspace(x1_low, x1_high, HYPERBOLA_GRID)
        gaps = np.array([scaled_gap(x1, c) for x1 in grid])
        k = int(np.argmin(gaps))
        left, right = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        if right > left:
            refined = minimize_scalar(
                scaled_gap, bounds=(left, right), args=(c,), method="bounded",
                options={"xatol": 1e-14},
            )
            candidates.append(float(refined.x))
        candidates.append(float(grid[k]))
        best = min(best, min(scaled_gap(x1, c) for x1 in candidates))
    if not math.isfinite(best):
        raise ArgumentError("Optimum hyperbola does not intersect the box")
    return math.sqrt(best)


def error_x(x_hat, reference: ReferenceValues, bounds: Bounds) -> float:
    """
    Scaled design-space error ||x_hat - x*|| / sqrt(D), both points mapped to
    the unit hypercube. Manifold optima use the distance to the nearest
    optimal point.
    """
    point = bounds.validate(x_hat)
    dimension = bounds.dimension
    location = reference.optimum_location
    if isinstance(location, PointOptimum):
        gap = scale_to_unit(point, bounds) - scale_to_unit(location.coords, bounds)
        return float(np.linalg.norm(gap) / math.sqrt(dimension))
    if isinstance(location, CoordinateManifold):
        axis = location.axis
        lo, hi = bounds.lower[axis], bounds.upper[axis]
        return abs((point[axis] - location.value) / (hi - lo)) / math.sqrt(dimension)
    if isinstance(location, HyperbolaManifold):
        return _distance_to_hyperbola(point, location, bounds) / math.sqrt(dimension)
    raise ArgumentError(f"Unsupported optimum location {location!r}")


def error_f(f_at_x_hat: float, reference: ReferenceValues) -> float:
    width = _normalization_width(reference.f_min, reference.f_max)
    return (f_at_x_hat - reference.f_min) / width


def error_t(e_x: float, e_f: float) -> float:
    return math.sqrt((e_x * e_x + e_f * e_f) / 2.0)


def cost_grid(budget: float, resolution: int = TRACE_RESOLUTION) -> np.ndarray:
    return np.linspace(0.0, budget, resolution)


def resample_trace(trace: Sequence[TracePoint], budget: float, resolution: int = TRACE_RESOLUTION) -> np.ndarray:
    """Best level-1 value available at each grid cost; +inf before the first level-1 evaluation."""
    grid = cost_grid(budget, resolution)
    values = np.full(grid.shape, np.inf)
    for entry in trace:
        # the trace is non-increasing, so later entries overwrite
        values[grid >= entry.cumulative_cost - 1e-12] = entry.value
    return values


def _statistics(values: Sequence[float]) -> dict:
    data = np.asarray(values, dtype=float)
    q25, q75 = np.percentile(data, [25, 75])
    return {
        "count": int(data.size),
        "median": float(np.median(data)),
        "mean": float(np.mean(data)),
        "std": float(np.std(data)),
        "min": float(np.min(data)),
        "max": float(np.max(data)),
        "iqr": float(q75 - q25),
    }


def aggregate(
    reports: Sequence[MetricsReport],
    traces: Optional[Sequence[Sequence[TracePoint]]] = None,
    budget: Optional[float] = None,
) -> dict:
    """
    Per-metric statistics across repeats. Absent values are skipped; a metric
    absent from every report summarizes to None. With traces and a budget the
    result also carries the median best-value curve on a common cost grid.
    """
    if not reports:
        raise ArgumentError("Cannot aggregate an empty list of reports")
    summary: dict = {"repeats": len(reports), "metrics": {}}
    for name in METRIC_NAMES:
        present = [getattr(report, name) for report in reports if getattr(report, name) is not None]
        summary["metrics"][name] = _statistics(present) if present else None
    summary["runs_without_high_fidelity_evidence"] = sum(
        1 for report in reports if not report.high_fidelity_evidence
    )
    if traces is not None and budget is not None:
        curves = np.array([resample_trace(trace, budget) for trace in traces])
        summary["convergence"] = {
            "cost": cost_grid(budget).tolist(),
            "median": np.median(curves, axis=0).tolist(),
        }
    return summary


def validation_points(spec: BenchmarkSpec, seed: Optional[int] = None) -> np.ndarray:
    """Full-factorial grid for D <= 3, otherwise a seeded Latin hypercube of 1000*D points."""
    dimension = spec.dimension
    lower, upper = spec.bounds.lower_array, spec.bounds.upper_array
    if dimension in GRID_POINTS:
        axes = [np.linspace(lower[k], upper[k], GRID_POINTS[dimension]) for k in range(dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    seed = get_settings().VALIDATION_SEED if seed is None else seed
    sampler = qmc.LatinHypercube(d=dimension, seed=seed)
    unit = sampler.random(n=LHS_POINTS_PER_DIMENSION * dimension)
    return qmc.scale(unit, lower, upper)


def build_validation_sample(spec: BenchmarkSpec, surrogate: Predictor, seed: Optional[int] = None) -> ValidationSample:
    benchmark = get_benchmark(spec.id)
    points = validation_points(spec, seed)
    truth = benchmark.evaluate_many(1, points)
    predicted = np.asarray(surrogate(points), dtype=float).reshape(-1)
    return ValidationSample(points=points, truth=truth, predicted=predicted)


def observed_extrema(history: RunHistory) -> tuple[float, float]:
    values = [record.value for record in history.on_budget_records if record.level == 1]
    if not values:
        raise ArgumentError(f"Run on {history.benchmark_id} has no level-1 values to normalize by")
    return min(values), max(values)


def evaluate_run(
    history: RunHistory,
    surrogate: Optional[Predictor] = None,
    mode: NormalizationMode = NormalizationMode.TABLE,
    validation_seed: Optional[int] = None,
) -> MetricsReport:
    """Goal-sensitive metrics at the history's incumbent, plus E_RMSE when a surrogate is given."""
    benchmark: Benchmark = get_benchmark(history.benchmark_id)
    spec = benchmark.spec
    mode = NormalizationMode(mode)

    e_x = e_f = e_t = None
    incumbent_value = None
    if history.incumbent is not None:
        incumbent_value = benchmark.evaluate(1, history.incumbent, noise_free=True)
        e_x = error_x(history.incumbent, spec.reference, spec.bounds)
        e_f = error_f(incumbent_value, spec.reference)
        e_t = error_t(e_x, e_f)

    e_rmse = None
    if surrogate is not None:
        sample = build_validation_sample(spec, surrogate, validation_seed)
        try:
            if mode == NormalizationMode.OBSERVED:
                norm = observed_extrema(history)
            else:
                norm = (spec.reference.f_min, spec.reference.f_max)
            e_rmse = rmse_error(sample, norm)
        except ArgumentError as e:
            logger.warning(f"E_RMSE skipped for {spec.id} (seed {history.seed}): {e.message}")

    return MetricsReport(
        benchmark_id=spec.id,
        seed=history.seed,
        e_rmse=e_rmse,
        e_x=e_x,
        e_f=e_f,
        e_t=e_t,
        normalization_mode=mode,
        high_fidelity_evidence=history.high_fidelity_evidence,
        incumbent=history.incumbent,
        incumbent_value=incumbent_value,
        total_cost=history.total_cost,
    )
