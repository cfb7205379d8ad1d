"""Plain-text fit reports and comma-separated tables."""

from __future__ import annotations

import csv
import math
from pathlib import Path


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_report(path, values: dict, title: str | None = None) -> None:
    """key=value lines, one per entry, in insertion order."""
    lines = [f"# {title}"] if title else []
    lines += [f"{k}={format_value(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v.item() if hasattr(v, "item") else v) for v in row])


def write_residuals(path, x, y, fitted, x_name: str = "x") -> None:
    write_table(path, [x_name, "data", "fit", "residual"], ((a, b, c, b - c) for a, b, c in zip(x, y, fitted)))
