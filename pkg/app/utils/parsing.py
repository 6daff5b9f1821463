from typing import List, Sequence, Union

from app.core import ArgumentError


def parse_point(text: str) -> List[float]:
    """Comma-separated coordinates, e.g. "2.4674,2.1932"."""
    result = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ArgumentError(f"Empty coordinate in {text!r}")
        try:
            result.append(float(part))
        except ValueError:
            raise ArgumentError(f"Invalid coordinate: {part}") from None
    return result


def _scalar(text: str) -> Union[int, float, str]:
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            continue
    return text


def parse_parameter_assignments(assignments: Sequence[str]) -> dict:
    """["top_k=3", "screen_fraction=0.4"] -> {"top_k": 3, "screen_fraction": 0.4}"""
    result = {}
    for item in assignments:
        if "=" not in item:
            raise ArgumentError(f"Invalid parameter {item!r}: expected key=value")
        key, value = (piece.strip() for piece in item.split("=", 1))
        if not key:
            raise ArgumentError(f"Invalid parameter {item!r}: empty key")
        result[key] = _scalar(value)
    return result
