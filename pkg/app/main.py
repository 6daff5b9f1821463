import logging
from fastapi import FastAPI
from app.routers import benchmarkRoute, experimentRoute
from app.config import get_settings

logging.basicConfig(level=getattr(logging, get_settings().LOG_LEVEL.upper(), logging.INFO))

app = FastAPI(title="Multifidelity Benchmark Harness", version="1.0.0")

app.include_router(benchmarkRoute.router, prefix="/benchmarks", tags=["Benchmarks"])
app.include_router(experimentRoute.router, prefix="/experiments", tags=["Experiments"])


@app.get("/config")
async def get_config():
    settings = get_settings()
    return {
        "results_dir": settings.RESULTS_DIR,
        "max_workers": settings.worker_count(),
        "refused_query_cap": settings.REFUSED_QUERY_CAP,
        "validation_seed": settings.VALIDATION_SEED,
    }


@app.get("/health")
async def health_check():
    return {"status": "healthy"}
