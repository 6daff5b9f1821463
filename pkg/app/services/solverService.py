"""
Solver contract, parameter schemas and the three baseline optimizers.

Baselines work in unit-hypercube coordinates and touch the benchmark only
through OracleRun.query; a refused query ends the search.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.interpolate import RBFInterpolator
from scipy.stats import qmc

from app.core import (
    ArgumentError,
    BenchmarkLookupError,
    BenchmarkSpec,
    BudgetExhaustedError,
    SOLVER_STREAM,
    StateError,
    seeded_stream,
    unscale,
)
from app.services.benchmarkService import get_benchmark
from app.services.oracleService import OracleRun, RunHistory, RunState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: type
    default: Any
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    description: str = ""

    def coerce(self, value: Any) -> Any:
        try:
            if self.kind is int and isinstance(value, float) and not value.is_integer():
                raise ValueError
            converted = self.kind(value)
        except (TypeError, ValueError):
            raise ArgumentError(f"Parameter {self.name} expects {self.kind.__name__}, got {value!r}") from None
        if self.minimum is not None and converted < self.minimum:
            raise ArgumentError(f"Parameter {self.name} = {converted} is below {self.minimum}")
        if self.maximum is not None and converted > self.maximum:
            raise ArgumentError(f"Parameter {self.name} = {converted} is above {self.maximum}")
        return converted

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "type": self.kind.__name__,
            "default": self.default,
            "minimum": self.minimum,
            "maximum": self.maximum,
            "description": self.description,
        }


_PATTERN_PARAMETERS = (
    ParameterSpec("initial_step", float, 0.25, 1e-9, 1.0, "first poll step, unit coordinates"),
    ParameterSpec("contraction", float, 0.5, 1e-3, 0.999, "step factor after an unsuccessful poll"),
    ParameterSpec("min_step", float, 1e-6, 1e-15, 1.0, "stop once the step falls below this"),
)


class Incumbent:
    """Best (point, value) seen so far at one fidelity level."""

    def __init__(self):
        self.point: Optional[np.ndarray] = None
        self.value = math.inf

    def offer(self, point: np.ndarray, value: float) -> bool:
        if value < self.value:
            self.point = np.array(point, dtype=float)
            self.value = value
            return True
        return False


class Solver(ABC):
    name: str = ""
    description: str = ""
    multifidelity: bool = False
    exposes_surrogate: bool = False
    parameter_specs: tuple[ParameterSpec, ...] = ()

    def __init__(self, parameters: Optional[dict] = None, seed: int = 0):
        self.parameters = resolve_parameters(type(self), parameters or {})
        self.seed = int(seed)
        self.rng = seeded_stream(self.seed, SOLVER_STREAM)

    def ask(self, run: OracleRun, level: int, x_unit: np.ndarray) -> Optional[float]:
        """Query at a unit-coordinate point; None once the oracle refuses."""
        try:
            return run.query(level, unscale(x_unit, run.spec.bounds))
        except BudgetExhaustedError:
            return None

    @abstractmethod
    def optimize(self, run: OracleRun) -> Optional[np.ndarray]:
        """Spend the run's budget and return the incumbent in design coordinates."""

    @classmethod
    def check_benchmark(cls, parameters: dict, spec: BenchmarkSpec) -> None:
        """Reject resolved parameters that cannot work on `spec`; raises ArgumentError."""

    def fit_surrogate(self, history: RunHistory) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        return None

    def _pattern_search(self, run: OracleRun, start: np.ndarray, start_value: float, level: int = 1) -> tuple[np.ndarray, float]:
        """
        Compass search on the unit box: poll -step and +step along each axis,
        move on any improvement, contract the step when a full sweep fails.
        """
        x = np.array(start, dtype=float)
        fx = start_value
        step = self.parameters["initial_step"]
        while step >= self.parameters["min_step"]:
            improved = False
            for axis in range(x.size):
                for direction in (-1.0, 1.0):
                    candidate = x.copy()
                    candidate[axis] = np.clip(candidate[axis] + direction * step, 0.0, 1.0)
                    if candidate[axis] == x[axis]:
                        continue
                    value = self.ask(run, level, candidate)
                    if value is None:
                        return x, fx
                    if value < fx:
                        x, fx = candidate, value
                        improved = True
            if not improved:
                step *= self.parameters["contraction"]
        logger.debug(f"Pattern search converged on {run.spec.id}: step below {self.parameters['min_step']}")
        return x, fx


class RandomSearch(Solver):
    name = "random-search"
    description = "Uniform random draws at a single fidelity until the budget is spent"
    parameter_specs = (
        ParameterSpec("fidelity", int, 1, 1, None, "fidelity level queried"),
    )

    @classmethod
    def check_benchmark(cls, parameters: dict, spec: BenchmarkSpec) -> None:
        spec.check_level(parameters["fidelity"])

    def optimize(self, run: OracleRun) -> Optional[np.ndarray]:
        level = run.spec.check_level(self.parameters["fidelity"])
        best = Incumbent()
        while True:
            x = self.rng.random(run.spec.dimension)
            value = self.ask(run, level, x)
            if value is None:
                break
            best.offer(x, value)
        return None if best.point is None else unscale(best.point, run.spec.bounds)


class LatinHypercubePatternSearch(Solver):
    name = "lhs-pattern-search"
    description = "Latin hypercube design at level 1, then compass search from its best point"
    parameter_specs = (
        ParameterSpec("initial_fraction", float, 0.2, 0.0, 1.0, "budget share of the initial design (0 starts at the box centre)"),
    ) + _PATTERN_PARAMETERS

    def optimize(self, run: OracleRun) -> Optional[np.ndarray]:
        dimension = run.spec.dimension
        best = Incumbent()
        samples = int(math.floor(self.parameters["initial_fraction"] * run.spec.budget))
        if samples >= 1:
            design = qmc.LatinHypercube(d=dimension, seed=self.rng).random(n=samples)
        else:
            design = np.full((1, dimension), 0.5)
        for x in design:
            value = self.ask(run, 1, x)
            if value is None:
                break
            best.offer(x, value)
        if best.point is None:
            return None
        x, _ = self._pattern_search(run, best.point, best.value)
        return unscale(x, run.spec.bounds)


class ScreeningRefinement(Solver):
    name = "mf-screening"
    description = (
        "Latin hypercube sweep at a low fidelity, level-1 check of the top candidates, "
        "then level-1 compass search from the best"
    )
    multifidelity = True
    exposes_surrogate = True
    parameter_specs = (
        ParameterSpec("screen_fraction", float, 0.5, 0.0, 0.95, "budget share spent on the low-fidelity sweep"),
        ParameterSpec("screen_level", int, 0, 0, None, "sweep fidelity; 0 picks the cheapest level"),
        ParameterSpec("top_k", int, 5, 1, None, "candidates promoted to level 1"),
        ParameterSpec("max_screen_points", int, 5000, 1, None, "cap on the sweep size"),
    ) + _PATTERN_PARAMETERS

    @classmethod
    def check_benchmark(cls, parameters: dict, spec: BenchmarkSpec) -> None:
        cls._screen_level(parameters, spec)

    @staticmethod
    def _screen_level(parameters: dict, spec: BenchmarkSpec) -> int:
        level = spec.check_level(parameters["screen_level"] or spec.levels)
        if level == 1:
            raise ArgumentError("screen_level must be a low fidelity (2 or more)")
        return level

    def optimize(self, run: OracleRun) -> Optional[np.ndarray]:
        spec = run.spec
        level = self._screen_level(self.parameters, spec)

        sweep_budget = self.parameters["screen_fraction"] * spec.budget
        samples = min(int(math.floor(sweep_budget / spec.cost(level))), self.parameters["max_screen_points"])
        screened: list[tuple[float, np.ndarray]] = []
        if samples >= 1:
            design = qmc.LatinHypercube(d=spec.dimension, seed=self.rng).random(n=samples)
            for x in design:
                value = self.ask(run, level, x)
                if value is None:
                    break
                screened.append((value, x))
        screened.sort(key=lambda pair: pair[0])
        candidates = [x for _, x in screened[: self.parameters["top_k"]]]
        if not candidates:
            candidates = [np.full(spec.dimension, 0.5)]

        best = Incumbent()
        for x in candidates:
            value = self.ask(run, 1, x)
            if value is None:
                break
            best.offer(x, value)
        if best.point is None:
            return None
        logger.debug(f"Screening on {spec.id}: {len(screened)} low-fidelity points, level-1 start {best.value}")
        x, _ = self._pattern_search(run, best.point, best.value)
        return unscale(x, spec.bounds)

    def fit_surrogate(self, history: RunHistory) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """
        Linear RBF interpolant of the run's level-1 evidence, fitted in unit
        coordinates. Returns None when there is too little evidence to fit.
        """
        bounds = get_benchmark(history.benchmark_id).spec.bounds
        records = [r for r in history.on_budget_records if r.level == 1]
        if len(records) < 2:
            logger.warning(f"Surrogate skipped for {history.benchmark_id} (seed {history.seed}): fewer than 2 level-1 points")
            return None
        lower, width = bounds.lower_array, bounds.width_array
        points = (np.array([r.point for r in records]) - lower) / width
        values = np.array([r.value for r in records])
        points, first = np.unique(points, axis=0, return_index=True)
        values = values[first]
        try:
            interpolant = RBFInterpolator(points, values, kernel="linear", degree=0)
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.warning(f"Surrogate fit failed for {history.benchmark_id} (seed {history.seed}): {e}")
            return None

        def predict(design_points: np.ndarray) -> np.ndarray:
            unit = (np.atleast_2d(np.asarray(design_points, dtype=float)) - lower) / width
            return interpolant(unit)

        return predict


SOLVERS: dict[str, type[Solver]] = {
    cls.name: cls for cls in (RandomSearch, LatinHypercubePatternSearch, ScreeningRefinement)
}


def resolve_parameters(solver_cls: type[Solver], parameters: dict, spec: Optional[BenchmarkSpec] = None) -> dict:
    """Defaults overlaid with `parameters`; unknown keys are rejected, and so are values `spec` cannot serve."""
    known = {spec.name: spec for spec in solver_cls.parameter_specs}
    unknown = sorted(set(parameters) - set(known))
    if unknown:
        raise ArgumentError(
            f"Unknown parameter(s) for {solver_cls.name}: {', '.join(unknown)}. "
            f"Use: {', '.join(known) or 'none'}"
        )
    resolved = {name: spec.default for name, spec in known.items()}
    for name, value in parameters.items():
        resolved[name] = known[name].coerce(value)
    if spec is not None:
        solver_cls.check_benchmark(resolved, spec)
    return resolved


def get_solver(name: str) -> type[Solver]:
    try:
        return SOLVERS[name]
    except KeyError:
        raise BenchmarkLookupError(f"Unknown solver {name!r}. Use: {', '.join(SOLVERS)}") from None


def list_solvers() -> list[dict]:
    return [
        {
            "name": cls.name,
            "description": cls.description,
            "multifidelity": cls.multifidelity,
            "exposes_surrogate": cls.exposes_surrogate,
            "parameters": [spec.to_dict() for spec in cls.parameter_specs],
        }
        for cls in SOLVERS.values()
    ]


@dataclass(frozen=True)
class SolverConfig:
    name: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "parameters", resolve_parameters(get_solver(self.name), dict(self.parameters)))

    def check_benchmark(self, spec: BenchmarkSpec) -> None:
        resolve_parameters(get_solver(self.name), self.parameters, spec)

    def build(self) -> Solver:
        return get_solver(self.name)(self.parameters, self.seed)


def solve(config: SolverConfig, run: OracleRun) -> tuple[Solver, Optional[np.ndarray]]:
    """Run one solver on a fresh run handle; the handle is closed afterwards if budget remains."""
    if run.state != RunState.OPEN or run.records:
        raise StateError(f"Solver {config.name} needs a fresh open run")
    solver = config.build()
    incumbent = solver.optimize(run)
    if run.state == RunState.OPEN:
        run.close()
    return solver, incumbent
