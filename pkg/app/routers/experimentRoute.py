import json
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Optional
from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse
from starlette.background import BackgroundTask

from app.core import HarnessError
from app.services.experimentService import load_experiment_config, run_experiment
from app.services.metricsService import NormalizationMode, evaluate_run
from app.services.reportService import parse_history, seed_from_name
from app.services.solverService import get_solver, list_solvers
from app.utils.security import get_file_hash, sanitize_filename, validate_history_upload

logger = logging.getLogger(__name__)

router = APIRouter()


def cleanup_dirs(*paths):
    for path in paths:
        shutil.rmtree(path, ignore_errors=True)


@router.get("/solvers")
async def solvers():
    return list_solvers()


@router.post("/run")
def run(
    benchmark_id: str = Form(...),
    solver: str = Form(...),
    parameters: str = Form("{}"),
    repeats: int = Form(20),
    base_seed: int = Form(0),
    normalization_mode: str = Form("table"),
):
    try:
        parsed = json.loads(parameters)
    except json.JSONDecodeError:
        raise HTTPException(status_code=400, detail="parameters must be a JSON object")
    if not isinstance(parsed, dict):
        raise HTTPException(status_code=400, detail="parameters must be a JSON object")

    workdir = tempfile.mkdtemp(prefix="mfbench-")
    try:
        config = load_experiment_config(
            benchmark_id=benchmark_id,
            solver=solver,
            parameters=parsed,
            repeats=repeats,
            base_seed=base_seed,
            normalization_mode=normalization_mode,
            output_dir=Path(workdir) / "out",
        )
        result = run_experiment(config)
    except HarnessError as e:
        cleanup_dirs(workdir)
        raise HTTPException(status_code=e.status_code, detail=e.message)
    except Exception as e:
        cleanup_dirs(workdir)
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")

    return JSONResponse(content=result.summary, background=BackgroundTask(cleanup_dirs, workdir))


@router.post("/metrics")
async def metrics(
    file: UploadFile = File(...),
    benchmark_id: str = Form(...),
    seed: Optional[int] = Form(None),
    normalization_mode: str = Form("table"),
    rmse: bool = Form(False),
):
    content = await validate_history_upload(file)
    filename = sanitize_filename(file.filename)
    logger.info(f"Metrics request for {filename} ({get_file_hash(content)}) on {benchmark_id}")

    try:
        mode = NormalizationMode(normalization_mode)
    except ValueError:
        raise HTTPException(status_code=400, detail="normalization_mode must be 'table' or 'observed'")

    try:
        if seed is None:
            seed = seed_from_name(filename) or 0
        history = parse_history(content.decode("utf-8"), benchmark_id, seed)
        surrogate = get_solver("mf-screening")().fit_surrogate(history) if rmse else None
        report = evaluate_run(history, surrogate, mode)
    except HarnessError as e:
        raise HTTPException(status_code=e.status_code, detail=e.message)

    return report.to_dict()
