"""
Closed-form multifidelity benchmark families (MF1-MF4, MF6), the rotation
and noise machinery they need, and the registry of the fourteen instances.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from app.core import (
    ArgumentError,
    BenchmarkLookupError,
    BenchmarkSpec,
    Bounds,
    CoordinateManifold,
    DesignPoint,
    HyperbolaManifold,
    PointOptimum,
    ReferenceValues,
    seeded_stream,
    NOISE_STREAM,
)
from app.services.dynamicsService import mf5_kernel

logger = logging.getLogger(__name__)

MF3_ANGLE = 0.2
MF3_SHIFT = 0.1
MF3_PHI = (10000.0, 5000.0, 2500.0)


@dataclass(frozen=True)
class FamilyInfo:
    name: str
    behaviors: str
    scalability: str
    discrepancy: str
    noisy: bool


FAMILIES = {
    "MF1": FamilyInfo("Forrester", "local / (dis)continuous", "-", "(non)linear", False),
    "MF2": FamilyInfo("Rosenbrock", "local", "parametric", "nonlinear", False),
    "MF3": FamilyInfo("Shifted-rotated Rastrigin", "multi-modal", "parametric / fidelity", "nonlinear", False),
    "MF4": FamilyInfo("Heterogeneous", "local / multi-modal", "parametric", "nonlinear", False),
    "MF5": FamilyInfo("Spring-mass system", "multi-modal", "parametric / fidelity", "nonlinear", False),
    "MF6": FamilyInfo("Paciorek", "multi-modal", "fidelity", "nonlinear", True),
}


@dataclass(frozen=True)
class RotationSpec:
    angle: float
    dimension: int
    matrix: np.ndarray = field(compare=False, repr=False)


@dataclass(frozen=True)
class NoiseSpec:
    alpha_per_level: tuple[float, ...]
    discrepancy_amplitude: float = 0.5

    def __post_init__(self):
        if any(alpha < 0 for alpha in self.alpha_per_level):
            raise ArgumentError("Noise standard deviations must be non-negative")
        if not 0.0 <= self.discrepancy_amplitude <= 1.0:
            raise ArgumentError("Discrepancy amplitude A must lie in [0, 1]")

    def alpha(self, level: int) -> float:
        return self.alpha_per_level[level - 1]


MF6_NOISE = NoiseSpec(alpha_per_level=(0.0125, 0.075), discrepancy_amplitude=0.5)


def fidelity_cost_schedule(levels: int) -> tuple[float, ...]:
    """lambda_l = (1 / 2^(l-1))^4, the nonlinear cost allocation used for MF3."""
    return tuple((1.0 / 2 ** (level - 1)) ** 4 for level in range(1, levels + 1))


def _check_level(level: int, levels: int, family: str) -> int:
    if isinstance(level, bool) or int(level) != level or not 1 <= level <= levels:
        raise ArgumentError(f"{family} fidelity level must be in 1..{levels}, got {level}")
    return int(level)


# --- MF1: Forrester and Forrester with jump --------------------------------

def _forrester(x: np.ndarray) -> np.ndarray:
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def _mf1_kernel(level: int, points: np.ndarray) -> np.ndarray:
    x = points[:, 0]
    high = _forrester(x)
    if level == 1:
        return high
    if level == 2:
        return (5.5 * x - 2.5) ** 2 * np.sin(12.0 * x - 4.0)
    if level == 3:
        return 0.75 * high + 5.0 * (x - 0.5) - 2.0
    return 0.5 * high + 10.0 * (x - 0.5) - 5.0


def _mf1_jump_kernel(level: int, points: np.ndarray) -> np.ndarray:
    x = points[:, 0]
    upper_branch = x > 0.5
    high = _forrester(x) + np.where(upper_branch, 10.0, 0.0)
    if level == 1:
        return high
    return 0.5 * high + 10.0 * (x - 0.5) + np.where(upper_branch, -2.0, -5.0)


# --- MF2: Rosenbrock ---------------------------------------------------------

def _rosenbrock_terms(points: np.ndarray, curvature: float, anchor: float) -> np.ndarray:
    head, tail = points[:, :-1], points[:, 1:]
    return np.sum(curvature * (tail - head ** 2) ** 2 + (anchor - head) ** 2, axis=1)


def _mf2_kernel(level: int, points: np.ndarray) -> np.ndarray:
    high = _rosenbrock_terms(points, 100.0, 1.0)
    if level == 1:
        return high
    linear = np.sum(0.5 * points, axis=1)
    if level == 2:
        return _rosenbrock_terms(points, 50.0, -2.0) - linear
    # denominator read with the summation index (0.25 x_i)
    return (high - 4.0 - linear) / (10.0 + np.sum(0.25 * points, axis=1))


# --- MF3: shifted-rotated Rastrigin -----------------------------------------

def _givens(dimension: int, i: int, j: int, theta: float) -> np.ndarray:
    rotation = np.eye(dimension)
    c, s = math.cos(theta), math.sin(theta)
    rotation[i, i] = c
    rotation[i, j] = -s
    rotation[j, i] = s
    rotation[j, j] = c
    return rotation


@lru_cache(maxsize=32)
def build_rotation(theta: float, dimension: int) -> RotationSpec:
    """
    Ordered product of Givens rotations by theta in the planes
    (1,2), (2,3), ..., (D-1,D). For D = 2 this is the plain 2x2 rotation.
    """
    if dimension < 2:
        raise ArgumentError(f"Rotation needs D >= 2, got {dimension}")
    matrix = np.eye(dimension)
    for i in range(dimension - 1):
        matrix = matrix @ _givens(dimension, i, i + 1, theta)
    matrix.setflags(write=False)
    return RotationSpec(angle=theta, dimension=dimension, matrix=matrix)


def _resolution_error(z: np.ndarray, phi: float) -> np.ndarray:
    theta = 1.0 - phi / 10000.0
    amplitude = theta
    frequency = 10.0 * math.pi * theta
    phase = 0.5 * math.pi * theta
    return np.sum(amplitude * np.cos(frequency * z + phase + math.pi) ** 2, axis=-1)


def mf3_resolution_error(z, phi: float) -> float:
    return float(_resolution_error(np.atleast_1d(np.asarray(z, dtype=float)), phi))


def _rastrigin(z: np.ndarray) -> np.ndarray:
    return np.sum(z ** 2 + 1.0 - np.cos(10.0 * math.pi * z), axis=-1)


def _mf3_kernel(level: int, points: np.ndarray) -> np.ndarray:
    rotation = build_rotation(MF3_ANGLE, points.shape[1]).matrix
    z = (points - MF3_SHIFT) @ rotation.T
    return _rastrigin(z) + _resolution_error(z, MF3_PHI[level - 1])


# --- MF4: heterogeneous -----------------------------------------------------

def _mf4_kernel(level: int, points: np.ndarray) -> np.ndarray:
    dimension = points.shape[1]
    x1 = points[:, 0]
    if dimension == 1:
        high = np.sin(30.0 * (x1 - 0.9) ** 4) * np.cos(2.0 * (x1 - 0.9)) + (x1 - 0.9) / 2.0
        if level == 1:
            return high
        return (high - 1.0 + x1) / (1.0 + 0.25 * x1)

    index = np.arange(1, dimension + 1, dtype=float)
    products = np.cumprod(points, axis=1)
    coupling = np.sum(index[1:] * points[:, 1:] ** index[1:] * np.sin(products[:, 1:]), axis=1)
    high = np.sin(21.0 * (x1 - 0.9) ** 4) * np.cos(2.0 * (x1 - 0.9)) + (x1 - 0.7) / 2.0 + coupling
    if level == 1:
        return high
    weighted = 0.25 * index * points
    denominator = 5.0 + np.sum(weighted[:, :2], axis=1) - np.sum(weighted[:, 2:], axis=1)
    return (high - 2.0 + np.sum(points, axis=1)) / denominator


# --- MF6: Paciorek with noise -----------------------------------------------

def _mf6_kernel(level: int, points: np.ndarray) -> np.ndarray:
    inverse = 1.0 / np.prod(points, axis=1)
    core = np.sin(inverse)
    if level == 1:
        return core
    amplitude = MF6_NOISE.discrepancy_amplitude
    return core - 9.0 * amplitude ** 2 * np.cos(inverse)


# --- public family operations -----------------------------------------------

MF1_BOUNDS = Bounds.uniform(1, 0.0, 1.0)
MF6_BOUNDS = Bounds.uniform(2, 0.3, 1.0)


def _evaluate_one(kernel: Callable, level: int, point: DesignPoint) -> float:
    return float(kernel(level, point[np.newaxis, :])[0])


def mf1_eval(level: int, x) -> float:
    level = _check_level(level, 4, "MF1")
    return _evaluate_one(_mf1_kernel, level, MF1_BOUNDS.validate(x))


def mf1_jump_eval(level: int, x) -> float:
    level = _check_level(level, 2, "MF1.2")
    return _evaluate_one(_mf1_jump_kernel, level, MF1_BOUNDS.validate(x))


def mf2_eval(level: int, x) -> float:
    level = _check_level(level, 3, "MF2")
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size < 2:
        raise ArgumentError("MF2 needs D >= 2")
    return _evaluate_one(_mf2_kernel, level, Bounds.uniform(point.size, -2.0, 2.0).validate(point))


def mf3_eval(level: int, x) -> float:
    level = _check_level(level, 3, "MF3")
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size < 2:
        raise ArgumentError("MF3 needs D >= 2")
    return _evaluate_one(_mf3_kernel, level, Bounds.uniform(point.size, -0.1, 0.2).validate(point))


def mf4_eval(level: int, x) -> float:
    level = _check_level(level, 2, "MF4")
    point = np.atleast_1d(np.asarray(x, dtype=float))
    return _evaluate_one(_mf4_kernel, level, Bounds.uniform(point.size, 0.0, 1.0).validate(point))


def mf6_eval(
    level: int,
    x,
    rng: Optional[np.random.Generator] = None,
    noise_free: bool = False,
) -> float:
    """
    Paciorek response at one point.

    Args:
        level: 1 (high fidelity) or 2
        x: point in [0.3, 1]^2
        rng: noise stream; required unless noise_free
        noise_free: drop the normal draw, leaving the deterministic core

    Returns:
        Deterministic core plus one N(0, alpha_level) draw
    """
    level = _check_level(level, 2, "MF6")
    value = _evaluate_one(_mf6_kernel, level, MF6_BOUNDS.validate(x))
    if noise_free:
        return value
    if rng is None:
        raise ArgumentError("MF6 is noisy: a seeded noise stream is required")
    return value + float(rng.normal(0.0, MF6_NOISE.alpha(level)))


# --- registry ---------------------------------------------------------------

@dataclass(frozen=True)
class Benchmark:
    """A BenchmarkSpec bound to its family kernel."""
    spec: BenchmarkSpec
    kernel: Callable[[int, np.ndarray], np.ndarray] = field(compare=False, repr=False)
    noise: Optional[NoiseSpec] = None

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def family(self) -> FamilyInfo:
        return FAMILIES[self.spec.family]

    @property
    def noisy(self) -> bool:
        return self.noise is not None

    def evaluate(
        self,
        level: int,
        x,
        rng: Optional[np.random.Generator] = None,
        noise_free: bool = False,
    ) -> float:
        level = self.spec.check_level(level)
        value = _evaluate_one(self.kernel, level, self.spec.bounds.validate(x))
        if self.noise is None or noise_free:
            return value
        if rng is None:
            raise ArgumentError(f"{self.id} is noisy: a seeded noise stream is required")
        return value + float(rng.normal(0.0, self.noise.alpha(level)))

    def evaluate_many(self, level: int, points) -> np.ndarray:
        """Noise-free batch evaluation; rows must lie in the box."""
        level = self.spec.check_level(level)
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, np.newaxis] if self.spec.dimension == 1 else points[np.newaxis, :]
        if points.shape[1] != self.spec.dimension:
            raise ArgumentError(f"{self.id}: points must have {self.spec.dimension} columns")
        for row in (points.min(axis=0), points.max(axis=0)):
            self.spec.bounds.validate(row)
        return np.asarray(self.kernel(level, points), dtype=float)


def _spec(benchmark_id, family, dimension, lower, upper, costs, budget, optimum, f_star, f_min, f_max):
    return BenchmarkSpec(
        id=benchmark_id,
        family=family,
        dimension=dimension,
        bounds=Bounds.uniform(dimension, lower, upper),
        fidelity_costs=tuple(costs),
        budget=float(budget),
        reference=ReferenceValues(optimum, f_star, f_min, f_max),
    )


def _ones(dimension: int, value: float) -> PointOptimum:
    return PointOptimum((value,) * dimension)


_ROSENBROCK_COSTS = (1.0, 5.0e-1, 1.0e-1)
_RASTRIGIN_COSTS = (1.0, 6.25e-2, 3.90625e-3)
_HETEROGENEOUS_COSTS = (1.0, 2.0e-1)
_SPRING_COSTS = (1.0, 1.66667e-2)
_PACIOREK_OPTIMUM = HyperbolaManifold(
    constants=(2.0 / (3.0 * math.pi), 2.0 / (7.0 * math.pi)),
    label="all x with x_1*x_2 = 2/((3+j)pi), j in {0, 4}",
)


def _build_registry() -> dict[str, Benchmark]:
    entries = [
        (_spec("MF1.1", "MF1", 1, 0.0, 1.0, (1.0, 5.0e-1, 1.0e-1, 5.0e-2), 100,
               PointOptimum((0.75724876,)), -6.020740, -6.0207, 1.5830e1), _mf1_kernel, None),
        (_spec("MF1.2", "MF1", 1, 0.0, 1.0, (1.0, 2.0e-1), 100,
               PointOptimum((0.1426,)), -0.9863, -0.9863, 2.5830e1), _mf1_jump_kernel, None),
        (_spec("MF2.1", "MF2", 2, -2.0, 2.0, _ROSENBROCK_COSTS, 200,
               _ones(2, 1.0), 0.0, 0.0, 3.6090e3), _mf2_kernel, None),
        (_spec("MF2.2", "MF2", 5, -2.0, 2.0, _ROSENBROCK_COSTS, 500,
               _ones(5, 1.0), 0.0, 0.0, 1.4436e4), _mf2_kernel, None),
        (_spec("MF2.3", "MF2", 10, -2.0, 2.0, _ROSENBROCK_COSTS, 1000,
               _ones(10, 1.0), 0.0, 0.0, 3.2481e4), _mf2_kernel, None),
        (_spec("MF3.1", "MF3", 2, -0.1, 0.2, _RASTRIGIN_COSTS, 200,
               _ones(2, 0.1), 0.0, 0.0, 4.0200), _mf3_kernel, None),
        (_spec("MF3.2", "MF3", 5, -0.1, 0.2, _RASTRIGIN_COSTS, 500,
               _ones(5, 0.1), 0.0, 0.0, 1.0050e1), _mf3_kernel, None),
        (_spec("MF3.3", "MF3", 10, -0.1, 0.2, _RASTRIGIN_COSTS, 1000,
               _ones(10, 0.1), 0.0, 0.0, 2.0100e1), _mf3_kernel, None),
        (_spec("MF4.1", "MF4", 1, 0.0, 1.0, _HETEROGENEOUS_COSTS, 100,
               PointOptimum((0.27550,)), -0.625, -0.625, 3.6151e-1), _mf4_kernel, None),
        (_spec("MF4.2", "MF4", 2, 0.0, 1.0, _HETEROGENEOUS_COSTS, 200,
               CoordinateManifold(axis=0, value=0.0), -0.5627123, -0.56271, 1.8350), _mf4_kernel, None),
        (_spec("MF4.3", "MF4", 3, 0.0, 1.0, _HETEROGENEOUS_COSTS, 300,
               CoordinateManifold(axis=0, value=0.0), -0.5627123, -0.56271, 4.3594), _mf4_kernel, None),
        (_spec("MF5.1", "MF5", 2, 1.0, 4.0, _SPRING_COSTS, 200,
               PointOptimum((2.467401, 2.193245)), -1.0, -1.0, 1.0), mf5_kernel("MF5.1"), None),
        (_spec("MF5.2", "MF5", 4, 1.0, 4.0, _SPRING_COSTS, 400,
               PointOptimum((1.000000, 3.946018, 4.000000, 3.286277)), -1.0, -1.0, 1.0),
         mf5_kernel("MF5.2"), None),
        (_spec("MF6", "MF6", 2, 0.3, 1.0, (1.0, 2.0e-1), 200,
               _PACIOREK_OPTIMUM, -1.0, -1.0, 1.0), _mf6_kernel, MF6_NOISE),
    ]
    return {spec.id: Benchmark(spec, kernel, noise) for spec, kernel, noise in entries}


BENCHMARKS = _build_registry()


def benchmark_ids() -> list[str]:
    return list(BENCHMARKS)


def get_benchmark(benchmark_id: str) -> Benchmark:
    try:
        return BENCHMARKS[benchmark_id]
    except KeyError:
        raise BenchmarkLookupError(
            f"Unknown benchmark {benchmark_id!r}. Use: {', '.join(BENCHMARKS)}"
        ) from None


def evaluate_uncharged(benchmark_id: str, level: int, x, seed: Optional[int] = None) -> tuple[float, float]:
    """Single inspection evaluation outside any budget. Returns (value, cost of that level)."""
    benchmark = get_benchmark(benchmark_id)
    rng = None
    if benchmark.noisy:
        if seed is None:
            raise ArgumentError(f"{benchmark_id} is noisy: pass a seed for the noise stream")
        rng = seeded_stream(seed, NOISE_STREAM)
    value = benchmark.evaluate(level, x, rng=rng)
    logger.debug(f"Inspection evaluation {benchmark_id} level {level} at {x}: {value}")
    return value, benchmark.spec.cost(level)
