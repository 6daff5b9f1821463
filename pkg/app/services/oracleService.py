"""
Budget-tracked evaluation gateway. Every solver query goes through an
OracleRun: it is checked against the box, charged its fidelity cost,
recorded, and refused for good once the budget cannot cover it.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from itertools import count
from typing import Optional, Sequence, Union

from app.config import get_settings
from app.core import (
    BudgetExhaustedError,
    BudgetLedger,
    NOISE_STREAM,
    SolverRunawayError,
    StateError,
    seeded_stream,
)
from app.services.benchmarkService import Benchmark, get_benchmark

logger = logging.getLogger(__name__)


class RunState(str, Enum):
    CREATED = "created"
    OPEN = "open"
    TERMINATED = "terminated"
    CLOSED = "closed"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class EvaluationRecord:
    index: int
    level: int
    point: tuple[float, ...]
    value: float
    cost: float
    cumulative_cost: float
    timestamp: int
    off_budget: bool = False

@dataclass(frozen=True)
class TracePoint:
    cumulative_cost: float
    value: float
    point: tuple[float, ...]


def build_best_trace(records: Sequence[EvaluationRecord]) -> list[TracePoint]:
    """Running best over on-budget level-1 records; one entry per improvement."""
    trace: list[TracePoint] = []
    for record in records:
        if record.off_budget or record.level != 1:
            continue
        if not trace or record.value < trace[-1].value:
            trace.append(TracePoint(record.cumulative_cost, record.value, record.point))
    return trace


@dataclass(frozen=True)
class RunHistory:
    benchmark_id: str
    seed: int
    records: tuple[EvaluationRecord, ...]
    best_trace: tuple[TracePoint, ...]
    incumbent: Optional[tuple[float, ...]] = None
    incumbent_value: Optional[float] = None
    solver_name: str = ""

    @property
    def on_budget_records(self) -> list[EvaluationRecord]:
        return [record for record in self.records if not record.off_budget]

    @property
    def dimension(self) -> int:
        return get_benchmark(self.benchmark_id).spec.dimension

    @property
    def total_cost(self) -> float:
        on_budget = self.on_budget_records
        return on_budget[-1].cumulative_cost if on_budget else 0.0

    @property
    def high_fidelity_evidence(self) -> bool:
        return bool(self.best_trace)

    def level_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for record in self.on_budget_records:
            counts[record.level] = counts.get(record.level, 0) + 1
        return counts


class OracleRun:
    """
    Single-owner handle for one seeded run. Queries after the first refusal
    keep being refused; past REFUSED_QUERY_CAP of them the solver is
    treated as runaway.
    """

    def __init__(self, benchmark: Benchmark, seed: int, refused_query_cap: Optional[int] = None):
        self.benchmark = benchmark
        self.seed = int(seed)
        self.ledger = BudgetLedger(benchmark.spec.budget)
        self.noise_rng = seeded_stream(self.seed, NOISE_STREAM) if benchmark.noisy else None
        self.state = RunState.CREATED
        self.refused_queries = 0
        self.refused_query_cap = (
            get_settings().REFUSED_QUERY_CAP if refused_query_cap is None else refused_query_cap
        )
        self._records: list[EvaluationRecord] = []
        self._clock = count()

    @property
    def spec(self):
        return self.benchmark.spec

    @property
    def records(self) -> tuple[EvaluationRecord, ...]:
        return tuple(self._records)

    @property
    def terminated(self) -> bool:
        return self.state == RunState.TERMINATED

    def open(self) -> "OracleRun":
        if self.state != RunState.CREATED:
            raise StateError(f"Run on {self.spec.id} is already {self.state.value}")
        self.state = RunState.OPEN
        logger.info(f"Opened run on {self.spec.id} (seed {self.seed}, budget {self.spec.budget:g})")
        return self

    def query(self, level: int, x) -> float:
        """
        Evaluate the benchmark at fidelity `level`, charging its cost.

        Raises:
            StateError: run not open (never opened, closed or finalized)
            DomainError: x outside the box; nothing is charged
            BudgetExhaustedError: the charge does not fit; the run is now terminated
            SolverRunawayError: too many queries after the refusal
        """
        if self.state == RunState.TERMINATED:
            self._refuse(self.spec.cost(level))
        if self.state != RunState.OPEN:
            raise StateError(f"Run on {self.spec.id} is {self.state.value}; queries are not accepted")

        cost = self.spec.cost(level)
        point = self.spec.bounds.validate(x)
        if not self.ledger.charge(cost):
            self.state = RunState.TERMINATED
            logger.info(
                f"Budget exhausted on {self.spec.id} (seed {self.seed}): "
                f"spent {self.ledger.spent:g} of {self.ledger.total:g}"
            )
            self._refuse(cost)

        value = self.benchmark.evaluate(level, point, rng=self.noise_rng)
        self._records.append(EvaluationRecord(
            index=len(self._records),
            level=int(level),
            point=tuple(float(v) for v in point),
            value=value,
            cost=cost,
            cumulative_cost=self.ledger.spent,
            timestamp=next(self._clock),
        ))
        logger.debug(f"{self.spec.id} level {level} at {point.tolist()} -> {value}")
        return value

    def _refuse(self, cost: float):
        self.refused_queries += 1
        if self.refused_queries > self.refused_query_cap:
            logger.warning(
                f"Solver kept querying {self.spec.id} after exhaustion "
                f"({self.refused_queries} refusals); aborting run"
            )
            raise SolverRunawayError(
                f"Run on {self.spec.id} exceeded {self.refused_query_cap} refused queries"
            )
        raise BudgetExhaustedError(self.ledger.spent, self.ledger.total, cost)

    def close(self):
        """Solver-side stop before the budget runs out."""
        if self.state == RunState.OPEN:
            self.state = RunState.CLOSED
        elif self.state not in (RunState.TERMINATED, RunState.CLOSED):
            raise StateError(f"Cannot close a run that is {self.state.value}")


def open_run(benchmark: Union[Benchmark, str], seed: int, refused_query_cap: Optional[int] = None) -> OracleRun:
    if isinstance(benchmark, str):
        benchmark = get_benchmark(benchmark)
    return OracleRun(benchmark, seed, refused_query_cap).open()


def finalize(run: OracleRun, incumbent=None, solver_name: str = "") -> RunHistory:
    """
    Freeze the run into a RunHistory.

    The incumbent defaults to the tail of the best trace. When one exists it is
    re-evaluated noise-free at level 1 and appended as an off-budget record.
    """
    if run.state in (RunState.CREATED, RunState.FINALIZED):
        raise StateError(f"Cannot finalize a run that is {run.state.value}")
    if run.state == RunState.OPEN:
        raise StateError("Run is still open: close it or exhaust the budget before finalizing")

    records = list(run.records)
    trace = build_best_trace(records)
    if incumbent is None and trace:
        incumbent = trace[-1].point

    incumbent_point = None
    incumbent_value = None
    if incumbent is not None:
        point = run.spec.bounds.validate(incumbent)
        incumbent_point = tuple(float(v) for v in point)
        incumbent_value = run.benchmark.evaluate(1, point, noise_free=True)
        records.append(EvaluationRecord(
            index=len(records),
            level=1,
            point=incumbent_point,
            value=incumbent_value,
            cost=run.spec.cost(1),
            cumulative_cost=run.ledger.spent,
            timestamp=next(run._clock),
            off_budget=True,
        ))
    if not trace:
        logger.warning(f"Run on {run.spec.id} (seed {run.seed}) has no high-fidelity evidence")

    run.state = RunState.FINALIZED
    logger.info(
        f"Finalized run on {run.spec.id} (seed {run.seed}): {len(run.records)} queries, "
        f"cost {run.ledger.spent:g}"
    )
    return RunHistory(
        benchmark_id=run.spec.id,
        seed=run.seed,
        records=tuple(records),
        best_trace=tuple(trace),
        incumbent=incumbent_point,
        incumbent_value=incumbent_value,
        solver_name=solver_name,
    )


def replay_history(history: RunHistory, seed: Optional[int] = None, noise_free: bool = False) -> list[float]:
    """Re-issue the on-budget queries of a history against a fresh run and return the values."""
    benchmark = get_benchmark(history.benchmark_id)
    run = open_run(benchmark, history.seed if seed is None else seed)
    values = []
    for record in history.on_budget_records:
        if noise_free:
            values.append(benchmark.evaluate(record.level, record.point, noise_free=True))
        else:
            values.append(run.query(record.level, record.point))
    run.close()
    return values
