"""CSV emission helpers: atomic writes, stable formatting."""

from __future__ import annotations

import io
import os


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(cell) for cell in row) + "\n")
    return buf.getvalue()


def write_csv(path: str | os.PathLike, header: list[str], rows: list[list]) -> None:
    """Write then rename, so failures never leave partial output behind."""
    text = render_csv(header, rows)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
