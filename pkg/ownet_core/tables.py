"""CSV and JSON report writers with the run's number precision."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

FULL_PRECISION = "full"


def format_number(value: Any, precision: str = "6") -> str:
    """Six significant digits, or ``repr`` round-trip text for ``full``."""
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return repr(value) if precision == FULL_PRECISION else f"{value:.6g}"
    try:
        number = float(value)
    except (TypeError, ValueError):
        return str(value)
    if hasattr(value, "dtype") and getattr(value.dtype, "kind", "") in "iu":
        return str(int(value))
    return format_number(number, precision)


def round_json(payload: Any, precision: str = "6") -> Any:
    """Apply the report precision to every float inside ``payload``."""
    if isinstance(payload, dict):
        return {str(key): round_json(value, precision) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [round_json(item, precision) for item in payload]
    if isinstance(payload, bool) or payload is None or isinstance(payload, (int, str)):
        return payload
    if hasattr(payload, "item"):
        return round_json(payload.item(), precision)
    if isinstance(payload, float):
        if precision == FULL_PRECISION or not math.isfinite(payload):
            return payload
        return float(f"{payload:.6g}")
    return str(payload)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    precision: str = "6",
) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(cell, precision) for cell in row])


def write_json(path: Path, payload: Any, precision: str = "6") -> None:
    text = json.dumps(round_json(payload, precision), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
