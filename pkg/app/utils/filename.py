from urllib.parse import quote


def safe_filename(filename: str) -> str:
    if not filename:
        return ""
    filename = filename.replace("..", "")
    return quote(filename, safe='')


def run_filename(kind: str, seed: int, extension: str) -> str:
    """history_seed7.csv, metrics_seed7.json, ..."""
    return f"{kind}_seed{seed}.{extension}"


def experiment_dirname(benchmark_id: str, solver_name: str, base_seed: int) -> str:
    """Default directory name under RESULTS_DIR, e.g. MF2.1-mf-screening-base0"""
    return safe_filename(f"{benchmark_id}-{solver_name}-base{base_seed}")
