import pytest
from fastapi.testclient import TestClient

from app.main import app
from app.services.oracleService import finalize, open_run
from app.services.reportService import format_history
from app.services.solverService import SolverConfig, solve


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def finished_history():
    """Random-search history on MF1.1, seed 2"""
    run = open_run("MF1.1", 2)
    solver, incumbent = solve(SolverConfig("random-search", seed=2), run)
    return finalize(run, incumbent, solver.name)


@pytest.fixture
def history_bytes(finished_history):
    return format_history(finished_history).encode("utf-8")
