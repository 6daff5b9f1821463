from typing import Optional
from fastapi import APIRouter, Form, HTTPException

from app.core import HarnessError
from app.services.benchmarkService import BENCHMARKS, evaluate_uncharged, get_benchmark
from app.services.reportService import benchmark_row
from app.utils.parsing import parse_point

router = APIRouter()


@router.get("")
async def list_benchmarks():
    return [benchmark_row(benchmark) for benchmark in BENCHMARKS.values()]


@router.get("/{benchmark_id}")
async def describe_benchmark(benchmark_id: str):
    try:
        benchmark = get_benchmark(benchmark_id)
    except HarnessError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    row = benchmark_row(benchmark)
    family = benchmark.family
    row["family_info"] = {
        "behaviors": family.behaviors,
        "scalability": family.scalability,
        "discrepancy": family.discrepancy,
        "noise": family.noisy,
    }
    row["bounds"] = {"lower": list(benchmark.spec.bounds.lower), "upper": list(benchmark.spec.bounds.upper)}
    return row


@router.post("/{benchmark_id}/evaluate")
async def evaluate_point(
    benchmark_id: str,
    level: int = Form(...),
    x: str = Form(...),
    seed: Optional[int] = Form(None),
):
    try:
        value, cost = evaluate_uncharged(benchmark_id, level, parse_point(x), seed)
    except HarnessError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return {"benchmark_id": benchmark_id, "level": level, "value": value, "cost": cost}
