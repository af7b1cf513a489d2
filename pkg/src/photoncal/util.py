"""Small shared helpers."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def round_half_up(x: np.ndarray | float) -> np.ndarray | float:
    """Round with halves going up (0.5 -> 1, 1.5 -> 2), bit-exact across platforms."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write a file atomically: temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def strip_bounds(height: int, strip_rows: int = 256) -> list[tuple[int, int]]:
    """Fixed [y0, y1) row strips; independent of worker count by construction."""
    if strip_rows < 1:
        raise ValueError("strip_rows must be >= 1")
    return [(y0, min(y0 + strip_rows, height)) for y0 in range(0, height, strip_rows)]
