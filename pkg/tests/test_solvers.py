import math

import numpy as np
import pytest

from app.core import ArgumentError, BenchmarkLookupError, BudgetExhaustedError, SolverRunawayError, StateError
from app.services.benchmarkService import get_benchmark
from app.services.metricsService import evaluate_run
from app.services.oracleService import RunState, finalize, open_run
from app.services.solverService import (
    SOLVERS,
    ScreeningRefinement,
    Solver,
    SolverConfig,
    get_solver,
    list_solvers,
    resolve_parameters,
    solve,
)


def _solve(benchmark_id, name, seed=0, **parameters):
    run = open_run(benchmark_id, seed)
    solver, incumbent = solve(SolverConfig(name, parameters, seed), run)
    return run, finalize(run, incumbent, solver.name)


class KeepsQuerying(Solver):
    name = "keeps-querying"

    def optimize(self, run):
        while True:
            try:
                run.query(1, [0.5])
            except BudgetExhaustedError:
                continue


class TestRegistry:
    def test_at_least_three_solvers(self):
        assert {"random-search", "lhs-pattern-search", "mf-screening"} <= set(SOLVERS)

    def test_listing_describes_parameters(self):
        listing = {entry["name"]: entry for entry in list_solvers()}
        screening = listing["mf-screening"]
        assert screening["multifidelity"] and screening["exposes_surrogate"]
        assert "screen_fraction" in [p["name"] for p in screening["parameters"]]

    @pytest.mark.parametrize("name", sorted(SOLVERS))
    def test_defaults_validate(self, name):
        cls = get_solver(name)
        defaults = {spec.name: spec.default for spec in cls.parameter_specs}
        assert resolve_parameters(cls, {}) == defaults
        assert resolve_parameters(cls, defaults) == defaults

    def test_unknown_solver(self):
        with pytest.raises(BenchmarkLookupError):
            get_solver("simulated-annealing")

    def test_unknown_parameter(self):
        with pytest.raises(ArgumentError) as exc:
            SolverConfig("random-search", {"temperature": 3})
        assert "temperature" in exc.value.message

    def test_out_of_range_parameter(self):
        with pytest.raises(ArgumentError):
            SolverConfig("mf-screening", {"screen_fraction": 1.5})

    def test_integer_parameter_rejects_fraction(self):
        with pytest.raises(ArgumentError):
            SolverConfig("mf-screening", {"top_k": 2.5})

    def test_string_values_are_coerced(self):
        config = SolverConfig("lhs-pattern-search", {"initial_fraction": "0.1"})
        assert config.parameters["initial_fraction"] == 0.1

    def test_fidelity_checked_against_benchmark(self):
        spec = get_benchmark("MF1.1").spec
        assert resolve_parameters(get_solver("random-search"), {"fidelity": 4}, spec)["fidelity"] == 4
        with pytest.raises(ArgumentError):
            resolve_parameters(get_solver("random-search"), {"fidelity": 5}, spec)
        with pytest.raises(ArgumentError):
            SolverConfig("random-search", {"fidelity": 3}).check_benchmark(get_benchmark("MF4.1").spec)

    @pytest.mark.parametrize("screen_level", [1, 4])
    def test_screen_level_checked_against_benchmark(self, screen_level):
        config = SolverConfig("mf-screening", {"screen_level": screen_level})
        with pytest.raises(ArgumentError):
            config.check_benchmark(get_benchmark("MF2.1").spec)

    def test_default_screen_level_fits_every_benchmark(self):
        config = SolverConfig("mf-screening")
        for benchmark_id in ("MF1.1", "MF3.3", "MF6"):
            config.check_benchmark(get_benchmark(benchmark_id).spec)


class TestRandomSearch:
    def test_forrester_median_error(self):
        errors = []
        for seed in range(20):
            _, history = _solve("MF1.1", "random-search", seed)
            errors.append(evaluate_run(history).e_f)
        assert float(np.median(errors)) < 0.05

    def test_spends_the_whole_budget(self):
        run, history = _solve("MF1.1", "random-search", 3)
        assert run.ledger.spent == 100.0
        assert history.level_counts() == {1: 100}

    def test_low_fidelity_has_no_evidence(self):
        _, history = _solve("MF1.1", "random-search", 0, fidelity=4)
        assert history.incumbent is None
        assert not history.high_fidelity_evidence

    def test_fidelity_beyond_levels(self):
        with pytest.raises(ArgumentError):
            _solve("MF1.2", "random-search", 0, fidelity=3)


class TestLatinHypercubePatternSearch:
    def test_centre_start_improves_rosenbrock(self):
        _, history = _solve("MF2.1", "lhs-pattern-search", 0, initial_fraction=0.0)
        assert history.records[0].point == (0.0, 0.0)
        assert history.incumbent_value < 1.0

    def test_default_run_reaches_low_value(self):
        _, history = _solve("MF2.1", "lhs-pattern-search", 1)
        assert history.incumbent_value <= history.records[0].value
        assert evaluate_run(history).e_f < 0.02

    def test_converged_search_closes_the_run(self):
        run, history = _solve("MF1.1", "lhs-pattern-search", 0, initial_fraction=0.05, min_step=0.01)
        assert run.state == RunState.FINALIZED
        assert history.total_cost < 100.0


class TestScreeningRefinement:
    def test_rastrigin_budget_and_level_mix(self):
        _, screening = _solve("MF3.1", "mf-screening", 0)
        _, random = _solve("MF3.1", "random-search", 0)
        assert screening.total_cost <= 200.0
        level_one_cost = sum(r.cost for r in screening.on_budget_records if r.level == 1)
        random_cost = sum(r.cost for r in random.on_budget_records if r.level == 1)
        assert level_one_cost < random_cost
        assert screening.level_counts()[3] == 5000

    def test_screen_level_one_rejected(self):
        with pytest.raises(ArgumentError):
            _solve("MF2.1", "mf-screening", 0, screen_level=1)

    def test_no_sweep_starts_at_centre(self):
        _, history = _solve("MF2.1", "mf-screening", 0, screen_fraction=0.0)
        assert history.records[0].level == 1
        assert history.records[0].point == (0.0, 0.0)

    def test_surrogate_interpolates_evidence(self):
        run = open_run("MF2.1", 0)
        points = [[0.0, 0.0], [1.0, -1.0], [-1.5, 0.5], [0.5, 1.5], [1.0, 1.0]]
        values = [run.query(1, x) for x in points]
        run.query(2, [0.2, 0.2])
        run.close()
        surrogate = ScreeningRefinement().fit_surrogate(finalize(run))
        np.testing.assert_allclose(surrogate(np.array(points)), values, atol=1e-8)

    def test_surrogate_needs_two_points(self):
        run = open_run("MF2.1", 0)
        run.query(1, [0.0, 0.0])
        run.close()
        assert ScreeningRefinement().fit_surrogate(finalize(run)) is None

    def test_surrogate_feeds_rmse(self):
        _, history = _solve("MF1.1", "mf-screening", 2)
        surrogate = ScreeningRefinement().fit_surrogate(history)
        report = evaluate_run(history, surrogate)
        assert report.e_rmse is not None and math.isfinite(report.e_rmse)


class TestSolve:
    @pytest.mark.parametrize("name", sorted(SOLVERS))
    def test_same_seed_same_history(self, name):
        _, first = _solve("MF6", name, 5)
        _, second = _solve("MF6", name, 5)
        assert first.records == second.records

    def test_fuzzed_configurations_never_overspend(self):
        rng = np.random.default_rng(0)
        for trial in range(12):
            benchmark_id = ["MF1.1", "MF2.1", "MF4.2", "MF5.1"][trial % 4]
            parameters = {
                "screen_fraction": float(rng.uniform(0.0, 0.9)),
                "top_k": int(rng.integers(1, 10)),
                "initial_step": float(rng.uniform(0.01, 0.5)),
                "max_screen_points": int(rng.integers(1, 500)),
            }
            run, history = _solve(benchmark_id, "mf-screening", trial, **parameters)
            assert run.ledger.spent <= run.spec.budget
            costs = [r.cumulative_cost for r in history.on_budget_records]
            assert costs == sorted(costs)

    def test_run_must_be_fresh(self):
        run = open_run("MF2.1", 0)
        run.query(1, [0.0, 0.0])
        with pytest.raises(StateError):
            solve(SolverConfig("random-search"), run)

    def test_closed_run_rejected(self):
        run = open_run("MF2.1", 0)
        run.close()
        with pytest.raises(StateError):
            solve(SolverConfig("random-search"), run)

    def test_runaway_solver_is_stopped(self):
        run = open_run("MF1.1", 0, refused_query_cap=5)
        with pytest.raises(SolverRunawayError):
            KeepsQuerying().optimize(run)
        assert run.ledger.spent == 100.0
