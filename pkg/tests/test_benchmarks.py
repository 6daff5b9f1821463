import itertools
import math

import numpy as np
import pytest
from scipy.stats import qmc

from app.core import (
    ArgumentError,
    BenchmarkLookupError,
    CoordinateManifold,
    DomainError,
    HyperbolaManifold,
    PointOptimum,
    seeded_stream,
)
from app.services.benchmarkService import (
    BENCHMARKS,
    FAMILIES,
    MF6_NOISE,
    NoiseSpec,
    build_rotation,
    evaluate_uncharged,
    fidelity_cost_schedule,
    get_benchmark,
    mf1_eval,
    mf1_jump_eval,
    mf2_eval,
    mf3_eval,
    mf3_resolution_error,
    mf4_eval,
    mf6_eval,
)
from app.services.metricsService import error_x

MF6_OPTIMUM = math.sqrt(2.0 / (3.0 * math.pi))

# published f* is rounded; how far the level-1 value at x* may sit from it
OPTIMUM_TOLERANCE = {
    "MF1.1": 1e-5, "MF1.2": 1e-4, "MF2.1": 1e-12, "MF2.2": 1e-12, "MF2.3": 1e-12,
    "MF3.1": 1e-12, "MF3.2": 1e-12, "MF3.3": 1e-12, "MF4.1": 1e-3, "MF4.2": 1e-6, "MF4.3": 1e-6,
    "MF5.1": 1e-6, "MF5.2": 1e-4, "MF6": 1e-9,
}


class TestForrester:
    def test_optimum(self):
        assert mf1_eval(1, 0.75724876) == pytest.approx(-6.020740, abs=1e-5)

    def test_origin(self):
        assert mf1_eval(1, 0.0) == pytest.approx(4 * math.sin(-4), abs=1e-12)
        assert mf1_eval(1, 0.0) == pytest.approx(3.027210, abs=1e-6)

    def test_lowest_level_at_origin(self):
        assert mf1_eval(4, 0.0) == pytest.approx(-8.486395, abs=1e-6)

    def test_upper_end_matches_table_maximum(self):
        assert mf1_eval(1, 1.0) == pytest.approx(15.830, abs=1e-3)

    def test_affine_levels(self):
        for x in np.random.default_rng(1).random(50):
            f1 = mf1_eval(1, x)
            assert mf1_eval(3, x) == pytest.approx(0.75 * f1 + 5 * (x - 0.5) - 2, abs=1e-12)
            assert mf1_eval(4, x) == pytest.approx(0.5 * f1 + 10 * (x - 0.5) - 5, abs=1e-12)

    def test_invalid_level(self):
        with pytest.raises(ArgumentError):
            mf1_eval(5, 0.5)

    def test_out_of_domain(self):
        with pytest.raises(DomainError):
            mf1_eval(1, 1.1)


class TestForresterJump:
    def test_optimum(self):
        assert mf1_jump_eval(1, 0.1426) == pytest.approx(-0.9863, abs=1e-3)

    def test_branch_point_belongs_to_first_branch(self):
        assert mf1_jump_eval(1, 0.5) == pytest.approx(math.sin(2.0), abs=1e-12)

    def test_jump_just_past_branch_point(self):
        assert mf1_jump_eval(1, 0.500001) == pytest.approx(10.909, abs=1e-3)

    def test_low_fidelity_jump(self):
        x = 0.75
        high = mf1_jump_eval(1, x)
        assert mf1_jump_eval(2, x) == pytest.approx(0.5 * high + 10 * (x - 0.5) - 2, abs=1e-12)

    def test_only_two_levels(self):
        with pytest.raises(ArgumentError):
            mf1_jump_eval(3, 0.5)


class TestRosenbrock:
    def test_optimum(self):
        for dimension in (2, 5, 10):
            assert mf2_eval(1, np.ones(dimension)) == 0.0

    def test_corner_is_table_maximum(self):
        assert mf2_eval(1, [-2, -2]) == pytest.approx(3609)
        assert mf2_eval(1, [-2] * 5) == pytest.approx(14436)
        assert mf2_eval(1, [-2] * 10) == pytest.approx(32481)

    def test_medium_fidelity(self):
        assert mf2_eval(2, [1, 1]) == pytest.approx(8.0)

    def test_low_fidelity(self):
        assert mf2_eval(3, [1, 1]) == pytest.approx(-5.0 / 10.5, abs=1e-6)

    def test_needs_two_dimensions(self):
        with pytest.raises(ArgumentError):
            mf2_eval(1, [1.0])


class TestRotation:
    def test_two_dimensional_matrix(self):
        c, s = math.cos(0.2), math.sin(0.2)
        np.testing.assert_allclose(build_rotation(0.2, 2).matrix, [[c, -s], [s, c]], atol=1e-15)

    def test_zero_angle_is_identity(self):
        for dimension in (2, 5, 10):
            np.testing.assert_array_equal(build_rotation(0.0, dimension).matrix, np.eye(dimension))

    def test_orthogonal_with_unit_determinant(self):
        for dimension in (2, 5, 10):
            matrix = build_rotation(0.2, dimension).matrix
            np.testing.assert_allclose(matrix @ matrix.T, np.eye(dimension), atol=1e-12)
            assert np.linalg.det(matrix) == pytest.approx(1.0, abs=1e-12)

    def test_matrix_is_read_only(self):
        with pytest.raises(ValueError):
            build_rotation(0.2, 3).matrix[0, 0] = 2.0

    def test_one_dimension_rejected(self):
        with pytest.raises(ArgumentError):
            build_rotation(0.2, 1)


class TestRastrigin:
    def test_resolution_error_vanishes_at_full_resolution(self):
        z = np.random.default_rng(2).uniform(-1, 1, 5)
        assert mf3_resolution_error(z, 10000) == 0.0

    def test_resolution_error_at_origin(self):
        assert mf3_resolution_error(np.zeros(2), 2500) == pytest.approx(0.219670, abs=1e-6)
        assert mf3_resolution_error(np.zeros(2), 5000) == pytest.approx(0.5, abs=1e-12)

    def test_optimum(self):
        assert mf3_eval(1, [0.1, 0.1]) == 0.0
        assert mf3_eval(3, [0.1, 0.1]) == pytest.approx(0.219670, abs=1e-6)

    def test_level_one_is_rastrigin_of_rotated_shift(self):
        rotation = build_rotation(0.2, 5).matrix
        for x in np.random.default_rng(3).uniform(-0.1, 0.2, (10, 5)):
            z = rotation @ (x - 0.1)
            expected = np.sum(z ** 2 + 1 - np.cos(10 * np.pi * z))
            assert mf3_eval(1, x) == pytest.approx(expected, abs=1e-12)

    def test_grid_maximum_matches_table(self):
        axis = np.linspace(-0.1, 0.2, 1001)
        grid = np.column_stack([g.ravel() for g in np.meshgrid(axis, axis)])
        values = get_benchmark("MF3.1").evaluate_many(1, grid)
        assert values.max() == pytest.approx(4.020, abs=1e-2)


class TestHeterogeneous:
    def test_one_dimensional_optimum(self):
        assert mf4_eval(1, 0.27550) == pytest.approx(-0.625, abs=1e-3)

    def test_two_dimensional_optimum(self):
        assert mf4_eval(1, [0, 0]) == pytest.approx(-0.5627123, abs=1e-5)

    def test_one_dimensional_bridge(self):
        # f1(1) = sin(0.003) cos(0.2) + 0.05
        f1 = math.sin(0.003) * math.cos(0.2) + 0.05
        assert mf4_eval(1, 1.0) == pytest.approx(f1, abs=1e-12)
        assert mf4_eval(2, 1.0) == pytest.approx(f1 / 1.25, abs=1e-12)
        assert mf4_eval(2, 1.0) == pytest.approx(0.0423522, abs=1e-6)

    def test_constant_on_first_axis_plane(self):
        rng = np.random.default_rng(4)
        for dimension in (2, 3):
            for _ in range(20):
                x = np.concatenate([[0.0], rng.random(dimension - 1)])
                assert mf4_eval(1, x) == pytest.approx(-0.5627123, abs=1e-6)


class TestPaciorek:
    def test_noise_free_optimum(self):
        x = [MF6_OPTIMUM, MF6_OPTIMUM]
        assert mf6_eval(1, x, noise_free=True) == pytest.approx(-1.0, abs=1e-12)
        assert mf6_eval(2, x, noise_free=True) == pytest.approx(-1.0, abs=1e-9)

    def test_noise_free_bounded(self):
        for x in np.random.default_rng(5).uniform(0.3, 1.0, (200, 2)):
            assert -1.0 <= mf6_eval(1, x, noise_free=True) <= 1.0

    def test_noise_requires_stream(self):
        with pytest.raises(ArgumentError):
            mf6_eval(1, [0.5, 0.5])

    def test_noise_level_one(self):
        rng = seeded_stream(11, 0)
        core = mf6_eval(1, [0.5, 0.5], noise_free=True)
        samples = np.array([mf6_eval(1, [0.5, 0.5], rng) for _ in range(100_000)])
        assert 0.0120 <= samples.std(ddof=1) <= 0.0130
        assert samples.mean() == pytest.approx(core, abs=1e-3)

    def test_noise_level_two(self):
        rng = seeded_stream(12, 0)
        samples = np.array([mf6_eval(2, [0.5, 0.5], rng) for _ in range(100_000)])
        assert 0.072 <= samples.std(ddof=1) <= 0.078

    def test_seeded_replay(self):
        a = [mf6_eval(1, [0.4, 0.9], seeded_stream(3, 0)) for _ in range(3)]
        b = [mf6_eval(1, [0.4, 0.9], seeded_stream(3, 0)) for _ in range(3)]
        assert a == b

    def test_noise_spec_validation(self):
        assert MF6_NOISE.alpha(1) == 0.0125
        with pytest.raises(ArgumentError):
            NoiseSpec(alpha_per_level=(-0.1,))
        with pytest.raises(ArgumentError):
            NoiseSpec(alpha_per_level=(0.1,), discrepancy_amplitude=1.5)


class TestRegistry:
    def test_fourteen_instances(self):
        assert len(BENCHMARKS) == 14
        assert set(FAMILIES) == {"MF1", "MF2", "MF3", "MF4", "MF5", "MF6"}

    def test_rosenbrock_five(self):
        spec = get_benchmark("MF2.2").spec
        assert spec.dimension == 5
        assert spec.budget == 500
        assert spec.fidelity_costs == (1.0, 0.5, 0.1)

    def test_rastrigin_costs_follow_schedule(self):
        assert get_benchmark("MF3.1").spec.fidelity_costs == (1.0, 6.25e-2, 3.90625e-3)
        assert fidelity_cost_schedule(3) == (1.0, 6.25e-2, 3.90625e-3)

    def test_spring_mass_costs(self):
        assert get_benchmark("MF5.1").spec.fidelity_costs == (1.0, 1.66667e-2)

    def test_unknown_id_lists_valid_ids(self):
        with pytest.raises(BenchmarkLookupError) as exc:
            get_benchmark("MF0")
        assert "MF1.1" in exc.value.message
        assert exc.value.status_code == 404

    @pytest.mark.parametrize("benchmark_id", [
        "MF1.1", "MF1.2", "MF2.1", "MF2.2", "MF2.3", "MF3.1", "MF3.2", "MF3.3", "MF4.1", "MF5.1", "MF5.2",
    ])
    def test_table_optimum_reproduced(self, benchmark_id):
        tolerance = OPTIMUM_TOLERANCE[benchmark_id]
        benchmark = get_benchmark(benchmark_id)
        reference = benchmark.spec.reference
        assert isinstance(reference.optimum_location, PointOptimum)
        value = benchmark.evaluate(1, reference.optimum_location.coords)
        assert value == pytest.approx(reference.f_star, abs=tolerance)

    @pytest.mark.parametrize("benchmark_id", ["MF4.2", "MF4.3"])
    def test_manifold_optimum_reproduced(self, benchmark_id):
        benchmark = get_benchmark(benchmark_id)
        x = np.zeros(benchmark.spec.dimension)
        assert benchmark.evaluate(1, x) == pytest.approx(benchmark.spec.reference.f_star, abs=1e-6)

    def test_evaluate_many_matches_single(self):
        benchmark = get_benchmark("MF2.2")
        points = np.random.default_rng(6).uniform(-2, 2, (25, 5))
        batch = benchmark.evaluate_many(2, points)
        for point, value in zip(points, batch):
            assert benchmark.evaluate(2, point) == pytest.approx(value, abs=1e-9)

    def test_evaluate_many_rejects_out_of_bounds(self):
        with pytest.raises(DomainError):
            get_benchmark("MF1.1").evaluate_many(1, [0.5, 1.5])

    def test_grid_minimum_location(self):
        grid = np.linspace(0.0, 1.0, 10001)
        values = get_benchmark("MF1.1").evaluate_many(1, grid[:, None])
        assert abs(grid[np.argmin(values)] - 0.75724876) <= 1e-4

    def test_rosenbrock_grid_minimum_location(self):
        axis = np.linspace(-2.0, 2.0, 1001)
        grid = np.column_stack([g.ravel() for g in np.meshgrid(axis, axis)])
        values = get_benchmark("MF2.1").evaluate_many(1, grid)
        np.testing.assert_allclose(grid[np.argmin(values)], [1.0, 1.0], atol=4e-3)

    def test_uncharged_evaluation_reports_cost(self):
        value, cost = evaluate_uncharged("MF5.1", 2, [2.4674, 2.1932])
        assert cost == 1.66667e-2
        assert -1.0 <= value <= 1.0

    def test_uncharged_noisy_needs_seed(self):
        with pytest.raises(ArgumentError):
            evaluate_uncharged("MF6", 1, [0.5, 0.5])
        value, _ = evaluate_uncharged("MF6", 1, [0.5, 0.5], seed=1)
        again, _ = evaluate_uncharged("MF6", 1, [0.5, 0.5], seed=1)
        assert value == again


def _dense_sample(spec, seed: int = 0) -> np.ndarray:
    """Seeded Latin hypercube plus the box corners, and a 201-point-per-axis grid up to D = 2."""
    lower, upper = spec.bounds.lower_array, spec.bounds.upper_array
    dimension = spec.dimension
    unit = qmc.LatinHypercube(d=dimension, seed=seed).random(n=4096)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dimension)))
    parts = [unit, corners]
    if dimension <= 2:
        axis = np.linspace(0.0, 1.0, 201)
        parts.append(np.column_stack([g.ravel() for g in np.meshgrid(*([axis] * dimension))]))
    return lower + np.vstack(parts) * (upper - lower)


def _optimal_points(spec, rng) -> np.ndarray:
    """Points of the published optimum set: the point itself, or samples along the manifold."""
    location = spec.reference.optimum_location
    lower, upper = spec.bounds.lower_array, spec.bounds.upper_array
    if isinstance(location, PointOptimum):
        return np.array([location.coords], dtype=float)
    if isinstance(location, CoordinateManifold):
        points = rng.uniform(lower, upper, (20, spec.dimension))
        points[:, location.axis] = location.value
        return points
    assert isinstance(location, HyperbolaManifold)
    rows = []
    for constant in location.constants:
        first = np.linspace(max(lower[0], constant / upper[1]), min(upper[0], constant / lower[1]), 10)
        rows.append(np.column_stack([first, np.clip(constant / first, lower[1], upper[1])]))
    return np.vstack(rows)


class TestPublishedReferences:
    @pytest.mark.parametrize("benchmark_id", list(BENCHMARKS))
    def test_values_inside_published_range(self, benchmark_id):
        benchmark = get_benchmark(benchmark_id)
        reference = benchmark.spec.reference
        values = benchmark.evaluate_many(1, _dense_sample(benchmark.spec))
        slack = 1e-3 * (reference.f_max - reference.f_min)
        assert np.all(np.isfinite(values))
        assert values.min() >= reference.f_min - slack
        assert values.max() <= reference.f_max + slack
        if benchmark.spec.dimension <= 2:
            assert values.max() >= reference.f_max - 0.02 * abs(reference.f_max)

    @pytest.mark.parametrize("benchmark_id", list(BENCHMARKS))
    def test_published_optimum_reached_and_not_beaten(self, benchmark_id):
        benchmark = get_benchmark(benchmark_id)
        spec = benchmark.spec
        reference = spec.reference
        tolerance = OPTIMUM_TOLERANCE[benchmark_id]
        rng = np.random.default_rng(17)

        optimal = _optimal_points(spec, rng)
        np.testing.assert_allclose(benchmark.evaluate_many(1, optimal), reference.f_star, atol=tolerance)

        assert benchmark.evaluate_many(1, _dense_sample(spec, seed=1)).min() >= reference.f_star - tolerance

        step = 1e-3 * spec.bounds.width_array
        neighbours = np.vstack([
            np.clip(point + rng.uniform(-1.0, 1.0, (32, spec.dimension)) * step,
                    spec.bounds.lower_array, spec.bounds.upper_array)
            for point in optimal
        ])
        assert benchmark.evaluate_many(1, neighbours).min() >= reference.f_star - tolerance

    @pytest.mark.parametrize("benchmark_id", [b for b in BENCHMARKS if BENCHMARKS[b].spec.dimension <= 2])
    def test_grid_minimum_lies_on_published_optimum(self, benchmark_id):
        benchmark = get_benchmark(benchmark_id)
        spec = benchmark.spec
        lower, upper = spec.bounds.lower_array, spec.bounds.upper_array
        axis = np.linspace(0.0, 1.0, 201)
        unit = np.column_stack([g.ravel() for g in np.meshgrid(*([axis] * spec.dimension))])
        grid = lower + unit * (upper - lower)
        best = grid[np.argmin(benchmark.evaluate_many(1, grid))]
        assert error_x(best, spec.reference, spec.bounds) <= 0.02
