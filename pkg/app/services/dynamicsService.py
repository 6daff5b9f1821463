"""
Coupled spring-mass benchmark (MF5): two masses between three springs,
no damping, integrated with classical RK4 at a fidelity-defining time step.
"""
from dataclasses import dataclass

import numpy as np

from app.core import ArgumentError, Bounds, DegeneracyError


PARAMETER_RANGE = (1.0, 4.0)
VARIANT_DIMENSIONS = {"MF5.1": 2, "MF5.2": 4}


@dataclass(frozen=True)
class SpringMassParams:
    k1: float
    k2: float
    k3: float
    m1: float = 1.0
    m2: float = 1.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "m1", "m2"):
            value = getattr(self, name)
            if not value > 0:
                raise ArgumentError(f"Spring-mass parameter {name} must be positive, got {value}")

    @classmethod
    def from_design(cls, x, variant: str) -> "SpringMassParams":
        """MF5.1 varies (k1, k2) with unit masses; MF5.2 varies (k1, k2, m1, m2). k3 = k1 always."""
        x = np.asarray(x, dtype=float)
        if variant == "MF5.1":
            return cls(k1=x[0], k2=x[1], k3=x[0])
        if variant == "MF5.2":
            return cls(k1=x[0], k2=x[1], k3=x[0], m1=x[2], m2=x[3])
        raise ArgumentError(f"Unknown spring-mass variant {variant!r}")


@dataclass(frozen=True)
class SimulationConfig:
    dt: float
    t_end: float = 6.0
    x0: tuple[float, float] = (1.0, 0.0)
    v0: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ArgumentError(f"Time step must be positive, got {self.dt}")
        steps = round(self.t_end / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ArgumentError(f"t_end {self.t_end} is not an integer multiple of dt {self.dt}")

    @property
    def steps(self) -> int:
        return round(self.t_end / self.dt)


LEVEL_CONFIGS = {
    1: SimulationConfig(dt=0.01),
    2: SimulationConfig(dt=0.6),
}


def assemble(params: SpringMassParams) -> tuple[np.ndarray, np.ndarray]:
    mass = np.diag([params.m1, params.m2])
    stiffness = np.array([
        [-params.k1 - params.k2, params.k2],
        [params.k2, -params.k2 - params.k3],
    ])
    return mass, stiffness


def analytic_solution(params: SpringMassParams, config: SimulationConfig, t: float) -> np.ndarray:
    """
    Modal solution x(t) = sum_i [a_i cos(w_i t) + b_i sin(w_i t)] z_i.

    The eigenpairs of M^-1 K come from the closed-form 2x2 characteristic
    polynomial; a_i and b_i are fitted to the initial displacement and velocity.

    Raises:
        DegeneracyError: eigenvalues repeated, complex or non-negative
    """
    mass, stiffness = assemble(params)
    system = np.linalg.solve(mass, stiffness)
    a, b = system[0]
    c, d = system[1]
    trace = a + d
    determinant = a * d - b * c
    discriminant = trace * trace - 4.0 * determinant
    if discriminant <= 0.0:
        raise DegeneracyError("M^-1 K has repeated or complex eigenvalues")
    root = np.sqrt(discriminant)
    eigenvalues = np.array([(trace + root) / 2.0, (trace - root) / 2.0])
    if np.any(eigenvalues >= 0.0):
        raise DegeneracyError(f"M^-1 K eigenvalues must be negative, got {eigenvalues.tolist()}")
    if b == 0.0:
        raise DegeneracyError("Uncoupled masses: eigenvectors are not determined by the first row")

    frequencies = np.sqrt(-eigenvalues)
    modes = np.array([[b, b], eigenvalues - a])
    amplitudes = np.linalg.solve(modes, np.asarray(config.x0, dtype=float))
    rates = np.linalg.solve(modes, np.asarray(config.v0, dtype=float)) / frequencies
    weights = amplitudes * np.cos(frequencies * t) + rates * np.sin(frequencies * t)
    return modes @ weights


def _accelerations(k1, k2, k3, m1, m2, x1, x2):
    return (-(k1 + k2) * x1 + k2 * x2) / m1, (k2 * x1 - (k2 + k3) * x2) / m2


def integrate_many(k1, k2, k3, m1, m2, config: SimulationConfig) -> np.ndarray:
    """Vectorized RK4 over parameter arrays; state ordering (x1, x2, v1, v2). Returns x1(t_end)."""
    k1, k2, k3, m1, m2 = np.broadcast_arrays(*(np.asarray(p, dtype=float) for p in (k1, k2, k3, m1, m2)))
    x1 = np.full(k1.shape, config.x0[0])
    x2 = np.full(k1.shape, config.x0[1])
    v1 = np.full(k1.shape, config.v0[0])
    v2 = np.full(k1.shape, config.v0[1])
    h = config.dt
    half = 0.5 * h

    for _ in range(config.steps):
        a1, a2 = _accelerations(k1, k2, k3, m1, m2, x1, x2)
        bx1, bx2 = v1 + half * a1, v2 + half * a2
        b1, b2 = _accelerations(k1, k2, k3, m1, m2, x1 + half * v1, x2 + half * v2)
        cx1, cx2 = v1 + half * b1, v2 + half * b2
        c1, c2 = _accelerations(k1, k2, k3, m1, m2, x1 + half * bx1, x2 + half * bx2)
        dx1, dx2 = v1 + h * c1, v2 + h * c2
        d1, d2 = _accelerations(k1, k2, k3, m1, m2, x1 + h * cx1, x2 + h * cx2)

        x1 = x1 + h / 6.0 * (v1 + 2.0 * bx1 + 2.0 * cx1 + dx1)
        x2 = x2 + h / 6.0 * (v2 + 2.0 * bx2 + 2.0 * cx2 + dx2)
        v1 = v1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        v2 = v2 + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)

    return x1


def rk4_evaluate(params: SpringMassParams, config: SimulationConfig) -> float:
    result = integrate_many(params.k1, params.k2, params.k3, params.m1, params.m2, config)
    return float(result)


def variant_bounds(variant: str) -> Bounds:
    if variant not in VARIANT_DIMENSIONS:
        raise ArgumentError(f"Unknown spring-mass variant {variant!r}")
    return Bounds.uniform(VARIANT_DIMENSIONS[variant], *PARAMETER_RANGE)


def mf5_kernel(variant: str):
    """Batch kernel (level, X) -> values for the registry; X rows are already in bounds."""
    dimension = VARIANT_DIMENSIONS[variant]

    def kernel(level: int, points: np.ndarray) -> np.ndarray:
        config = LEVEL_CONFIGS[level]
        k1, k2 = points[:, 0], points[:, 1]
        if dimension == 4:
            m1, m2 = points[:, 2], points[:, 3]
        else:
            m1 = m2 = 1.0
        return integrate_many(k1, k2, k1, m1, m2, config)

    return kernel


def mf5_eval(level: int, x, variant: str = "MF5.1") -> float:
    if level not in LEVEL_CONFIGS:
        raise ArgumentError(f"MF5 fidelity level must be 1 or 2, got {level}")
    point = variant_bounds(variant).validate(x)
    return rk4_evaluate(SpringMassParams.from_design(point, variant), LEVEL_CONFIGS[level])
