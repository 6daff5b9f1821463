import os
from functools import lru_cache


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in ("1", "true", "yes", "on")


class Settings:
    def __init__(self):
        self.RESULTS_DIR: str = os.getenv("RESULTS_DIR", "./results")
        self.MAX_WORKERS: int = int(os.getenv("MAX_WORKERS", os.cpu_count() or 1))
        self.SINGLE_THREADED: bool = _env_flag("MFBENCH_SINGLE_THREADED")
        self.MAX_HISTORY_SIZE: int = int(os.getenv("MAX_HISTORY_SIZE", 20 * 1024 * 1024))
        self.REFUSED_QUERY_CAP: int = int(os.getenv("REFUSED_QUERY_CAP", 1000))
        self.VALIDATION_SEED: int = int(os.getenv("VALIDATION_SEED", 0))
        self.LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    def worker_count(self, requested: int | None = None) -> int:
        """Single-threaded mode wins over any requested pool size."""
        if self.SINGLE_THREADED:
            return 1
        return max(1, requested or self.MAX_WORKERS)


@lru_cache()
def get_settings() -> Settings:
    return Settings()
