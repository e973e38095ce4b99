"""Plain-text grid/field file formats and the flat key=value config format.

Grid files:   line 1 ``MPGRID 1 <height> <width>``, then height lines of
width space-separated decimal floats.  Field files: ``MPFIELD 1 <height>
<width>`` with "dx,dy" pairs per sample.  UTF-8, LF line endings, floats
printed with 17 significant digits so write -> read -> write is
byte-identical.

All writes go to a temporary file in the target directory followed by an
atomic rename, so failed commands never leave partial outputs behind.
"""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import ScalarGrid, VectorGrid

GRID_MAGIC = "MPGRID"
FIELD_MAGIC = "MPFIELD"
FORMAT_VERSION = "1"


class FileFormatError(ValueError):
    """Malformed grid/field/config file."""


def _fmt(x: float) -> str:
    return format(x, ".17g")


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def grid_to_text(grid: ScalarGrid) -> str:
    lines = [f"{GRID_MAGIC} {FORMAT_VERSION} {grid.height} {grid.width}"]
    for row in grid.data:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_grid(path: str | Path, grid: ScalarGrid) -> None:
    atomic_write_text(path, grid_to_text(grid))


def _parse_header(line: str, magic: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 4 or parts[0] != magic or parts[1] != FORMAT_VERSION:
        raise FileFormatError(f"bad header {line!r} (expected '{magic} {FORMAT_VERSION} H W')")
    try:
        h, w = int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise FileFormatError(f"bad header counts in {line!r}") from exc
    if h < 2 or w < 2:
        raise FileFormatError(f"degenerate shape {h}x{w}")
    return h, w


def _parse_float(tok: str) -> float:
    try:
        v = float(tok)
    except ValueError as exc:
        raise FileFormatError(f"bad float token {tok!r}") from exc
    if not math.isfinite(v):
        raise FileFormatError(f"non-finite value {tok!r}")
    return v


def grid_from_text(text: str) -> ScalarGrid:
    lines = text.splitlines()
    if not lines:
        raise FileFormatError("empty grid file")
    h, w = _parse_header(lines[0], GRID_MAGIC)
    if len(lines) < 1 + h:
        raise FileFormatError(f"expected {h} rows, found {len(lines) - 1}")
    data = np.empty((h, w))
    for i in range(h):
        toks = lines[1 + i].split()
        if len(toks) != w:
            raise FileFormatError(f"row {i}: expected {w} values, found {len(toks)}")
        data[i] = [_parse_float(t) for t in toks]
    return ScalarGrid(data)


def read_grid(path: str | Path) -> ScalarGrid:
    return grid_from_text(Path(path).read_text(encoding="utf-8"))


def field_to_text(field: VectorGrid) -> str:
    lines = [f"{FIELD_MAGIC} {FORMAT_VERSION} {field.height} {field.width}"]
    for rdx, rdy in zip(field.dx, field.dy):
        lines.append(" ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(rdx, rdy)))
    return "\n".join(lines) + "\n"


def write_field(path: str | Path, field: VectorGrid) -> None:
    atomic_write_text(path, field_to_text(field))


def field_from_text(text: str) -> VectorGrid:
    lines = text.splitlines()
    if not lines:
        raise FileFormatError("empty field file")
    h, w = _parse_header(lines[0], FIELD_MAGIC)
    if len(lines) < 1 + h:
        raise FileFormatError(f"expected {h} rows, found {len(lines) - 1}")
    dx = np.empty((h, w))
    dy = np.empty((h, w))
    for i in range(h):
        toks = lines[1 + i].split()
        if len(toks) != w:
            raise FileFormatError(f"row {i}: expected {w} pairs, found {len(toks)}")
        for j, tok in enumerate(toks):
            pair = tok.split(",")
            if len(pair) != 2:
                raise FileFormatError(f"row {i}: bad pair {tok!r}")
            dx[i, j] = _parse_float(pair[0])
            dy[i, j] = _parse_float(pair[1])
    return VectorGrid(dx=dx, dy=dy)


def read_field(path: str | Path) -> VectorGrid:
    return field_from_text(Path(path).read_text(encoding="utf-8"))


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``dotted.key=value`` lines; blank lines and #-comments allowed."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FileFormatError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise FileFormatError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def read_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
