"""CSV helpers: headers always written, floats at 12 significant digits."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterable, Sequence


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    if hasattr(value, "dtype"):
        return fmt(value.item())
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path: str | Path | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    text = csv_text(header, rows)
    if path is not None:
        Path(path).write_text(text)
    return text
