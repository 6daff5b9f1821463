"""
Domain types shared by the whole harness: errors, box bounds, reference
optimum descriptors, benchmark descriptors, the budget ledger and the
unit-hypercube scaling.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

DOMAIN_TOLERANCE = 1e-12

DesignPoint = NDArray[np.float64]


class HarnessError(Exception):
    """Base error, shaped like the service errors: a message plus an HTTP-style status."""
    status_code = 400

    def __init__(self, message: str, status_code: Optional[int] = None):
        self.message = message
        if status_code is not None:
            self.status_code = status_code
        super().__init__(self.message)


class DomainError(HarnessError):
    pass


class ArgumentError(HarnessError):
    pass


class ConfigError(HarnessError):
    pass


class BenchmarkLookupError(HarnessError):
    status_code = 404


class StateError(HarnessError):
    status_code = 409


class DegeneracyError(HarnessError):
    status_code = 422


class DimensionMismatchError(HarnessError):
    pass


class HistoryParseError(HarnessError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class BudgetExhaustedError(HarnessError):
    """Terminal refusal: the next charge would exceed the budget."""
    status_code = 402

    def __init__(self, spent: float, total: float, cost: float):
        self.spent = spent
        self.total = total
        self.cost = cost
        super().__init__(
            f"Budget exhausted: spent {spent:.6g} of {total:.6g}, next charge {cost:.6g} refused"
        )


class SolverRunawayError(HarnessError):
    status_code = 500


def _exact(value: float) -> Fraction:
    if not math.isfinite(value):
        raise ArgumentError(f"Cost must be finite, got {value}")
    # shortest repr keeps decimal table costs exact (0.05 -> 1/20)
    return Fraction(repr(float(value)))


@dataclass(frozen=True)
class Bounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) < 1:
            raise ArgumentError("Bounds need at least one dimension")
        if len(self.lower) != len(self.upper):
            raise ArgumentError("Lower and upper bounds have different lengths")
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper), start=1):
            if not lo < hi:
                raise ArgumentError(f"Bound {k}: lower {lo} must be below upper {hi}")

    @classmethod
    def uniform(cls, dimension: int, lower: float, upper: float) -> "Bounds":
        return cls((lower,) * dimension, (upper,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> DesignPoint:
        return np.array(self.lower, dtype=float)

    @property
    def upper_array(self) -> DesignPoint:
        return np.array(self.upper, dtype=float)

    @property
    def width_array(self) -> DesignPoint:
        return self.upper_array - self.lower_array

    def validate(self, x: Union[float, Sequence[float], DesignPoint]) -> DesignPoint:
        """Return x as a float vector, or raise naming the first offending component."""
        point = np.atleast_1d(np.asarray(x, dtype=float))
        if point.ndim != 1 or point.shape[0] != self.dimension:
            raise ArgumentError(
                f"Design point has {point.size} components, expected {self.dimension}"
            )
        for k, (value, lo, hi) in enumerate(zip(point, self.lower, self.upper), start=1):
            if not (lo - DOMAIN_TOLERANCE <= value <= hi + DOMAIN_TOLERANCE):
                raise DomainError(f"x_{k} = {value!r} outside [{lo}, {hi}]")
        return point

    def contains(self, x) -> bool:
        try:
            self.validate(x)
        except HarnessError:
            return False
        return True


@dataclass(frozen=True)
class PointOptimum:
    coords: tuple[float, ...]

    def describe(self) -> str:
        return "(" + ", ".join(format_coordinate(c) for c in self.coords) + ")"


@dataclass(frozen=True)
class CoordinateManifold:
    """Every point whose coordinate `axis` (0-based) equals `value`."""
    axis: int
    value: float

    def describe(self) -> str:
        return f"all x with x_{self.axis + 1} = {self.value:g}"


@dataclass(frozen=True)
class HyperbolaManifold:
    """Every 2-D point with x_1 * x_2 equal to one of `constants`."""
    constants: tuple[float, ...]
    label: str = ""

    def describe(self) -> str:
        return self.label or "all x with x_1*x_2 in {" + ", ".join(f"{c:.6g}" for c in self.constants) + "}"


OptimumLocation = Union[PointOptimum, CoordinateManifold, HyperbolaManifold]


def format_coordinate(value: float) -> str:
    text = f"{value:.8f}".rstrip("0")
    decimals = len(text.split(".")[1])
    return text + "0" * max(0, 6 - decimals)


@dataclass(frozen=True)
class ReferenceValues:
    optimum_location: OptimumLocation
    f_star: float
    f_min: float
    f_max: float

    def __post_init__(self):
        if not self.f_max > self.f_min:
            raise ArgumentError("Reference f_max must exceed f_min")
        # the published f_min is rounded; allow a sliver below it for f_star
        slack = 1e-4 * (self.f_max - self.f_min)
        if not (self.f_min - slack <= self.f_star <= self.f_max):
            raise ArgumentError(f"f_star {self.f_star} outside [{self.f_min}, {self.f_max}]")


@dataclass(frozen=True)
class BenchmarkSpec:
    id: str
    family: str
    dimension: int
    bounds: Bounds
    fidelity_costs: tuple[float, ...]
    budget: float
    reference: ReferenceValues

    def __post_init__(self):
        if self.dimension != self.bounds.dimension:
            raise ArgumentError(f"{self.id}: bounds dimension does not match D = {self.dimension}")
        if not self.fidelity_costs or self.fidelity_costs[0] != 1.0:
            raise ArgumentError(f"{self.id}: the highest fidelity must cost exactly 1")
        for previous, current in zip(self.fidelity_costs, self.fidelity_costs[1:]):
            if not current < previous:
                raise ArgumentError(f"{self.id}: fidelity costs must be strictly decreasing")
        if not self.budget > 0:
            raise ArgumentError(f"{self.id}: budget must be positive")

    @property
    def levels(self) -> int:
        return len(self.fidelity_costs)

    def check_level(self, level: int) -> int:
        if isinstance(level, bool) or int(level) != level or not 1 <= level <= self.levels:
            raise ArgumentError(f"{self.id}: fidelity level must be in 1..{self.levels}, got {level}")
        return int(level)

    def cost(self, level: int) -> float:
        return self.fidelity_costs[self.check_level(level) - 1]


class BudgetLedger:
    """Exact running total of accepted charges. Not thread-safe: one owner per run."""

    def __init__(self, total: float):
        if not total > 0:
            raise ArgumentError("Budget total must be positive")
        self._total = _exact(total)
        self._spent = Fraction(0)

    @property
    def total(self) -> float:
        return float(self._total)

    @property
    def spent(self) -> float:
        return float(self._spent)

    @property
    def remaining(self) -> float:
        return float(self._total - self._spent)

    def can_afford(self, cost: float) -> bool:
        return self._spent + _exact(cost) <= self._total

    def charge(self, cost: float) -> bool:
        """Accept the charge and return True, or leave the ledger untouched and return False."""
        if not cost > 0:
            raise ArgumentError(f"Charge must be positive, got {cost}")
        exact = _exact(cost)
        if self._spent + exact > self._total:
            return False
        self._spent += exact
        return True

    def __repr__(self) -> str:
        return f"BudgetLedger(total={self.total}, spent={self.spent})"


def charge(ledger: BudgetLedger, cost: float) -> bool:
    return ledger.charge(cost)


def scale_to_unit(x, bounds: Bounds) -> DesignPoint:
    point = bounds.validate(x)
    scaled = (point - bounds.lower_array) / bounds.width_array
    return np.clip(scaled, 0.0, 1.0)


def unscale(x_unit, bounds: Bounds) -> DesignPoint:
    point = np.atleast_1d(np.asarray(x_unit, dtype=float))
    if point.ndim != 1 or point.shape[0] != bounds.dimension:
        raise ArgumentError(
            f"Unit point has {point.size} components, expected {bounds.dimension}"
        )
    for k, value in enumerate(point, start=1):
        if not (-DOMAIN_TOLERANCE <= value <= 1.0 + DOMAIN_TOLERANCE):
            raise DomainError(f"unit coordinate {k} = {value!r} outside [0, 1]")
    point = np.clip(point, 0.0, 1.0)
    return bounds.lower_array + point * bounds.width_array


def seeded_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator per (seed, purpose) so noise and solver draws never alias."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


NOISE_STREAM = 0
SOLVER_STREAM = 1
