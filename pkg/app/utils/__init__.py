from .filename import safe_filename, run_filename, experiment_dirname
from .parsing import parse_point, parse_parameter_assignments
from .security import validate_history_upload, sanitize_filename, validate_history_content

__all__ = [
    "safe_filename",
    "run_filename",
    "experiment_dirname",
    "parse_point",
    "parse_parameter_assignments",
    "validate_history_upload",
    "sanitize_filename",
    "validate_history_content",
]
