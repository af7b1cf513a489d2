"""PNG containers.

14-bpc corrected images travel in 16-bit single-channel PNGs (values
0..16383, the two high bits zero); LIL output is 8-bit grayscale or RGB.
Pillow handles every case except 16-bit RGB, which it silently truncates
to 8 bits, so that one path goes through OpenCV.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError


def _atomic_save(im: Image.Image, path: str | Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".png.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            im.save(fh, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_png16(values: np.ndarray, path: str | Path) -> None:
    """Write a single-channel integer image into a 16-bit grayscale PNG."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D single-channel image, got shape {values.shape}")
    if not np.issubdtype(values.dtype, np.integer):
        raise ValueError(f"expected integer samples, got dtype {values.dtype}")
    if values.size and (int(values.min()) < 0 or int(values.max()) > 65535):
        raise ValueError(
            f"value overflow: range [{int(values.min())}, {int(values.max())}] "
            "does not fit a 16-bit container"
        )
    _atomic_save(Image.fromarray(values.astype(np.uint16)), path)


def read_png16(path: str | Path) -> np.ndarray:
    """Read a 16-bit grayscale PNG back to a uint16 array (lossless)."""
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I", "L"):
            raise FormatError(f"{path}: expected a grayscale PNG, got mode {im.mode}")
        arr = np.asarray(im)
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise FormatError(f"{path}: sample values exceed 16-bit range")
    return arr.astype(np.uint16)


def write_png8(values: np.ndarray, path: str | Path) -> None:
    """Write an 8-bit grayscale (H, W) or RGB (H, W, 3) PNG."""
    values = np.asarray(values)
    if values.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got dtype {values.dtype}")
    if values.ndim not in (2, 3) or (values.ndim == 3 and values.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3), got shape {values.shape}")
    _atomic_save(Image.fromarray(values), path)


def read_image_any(path: str | Path) -> np.ndarray:
    """Read a PNG for LIL input: gray or RGB, 8 or 16 bit, values preserved.

    Returns (H, W) uint8/uint16 for grayscale input and (H, W, 3) for RGB.
    """
    import cv2  # deferred: only LIL's generic reader needs it

    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise FormatError(f"{path}: not a readable image")
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        if arr.shape[2] != 3:
            raise FormatError(f"{path}: unsupported channel count {arr.shape[2]}")
        arr = arr[:, :, ::-1]  # BGR -> RGB
    if arr.dtype not in (np.uint8, np.uint16):
        raise FormatError(f"{path}: unsupported sample type {arr.dtype}")
    return np.ascontiguousarray(arr)


def write_rgb16(values: np.ndarray, path: str | Path) -> None:
    """Write a 16-bit RGB PNG (test fixture helper; Pillow cannot)."""
    import cv2

    values = np.asarray(values)
    if values.ndim != 3 or values.shape[2] != 3 or values.dtype != np.uint16:
        raise ValueError("expected (H, W, 3) uint16")
    ok, buf = cv2.imencode(".png", values[:, :, ::-1])
    if not ok:
        raise OSError(f"PNG encode failed for {path}")
    from .util import atomic_write_bytes

    atomic_write_bytes(path, buf.tobytes())


def png16_roundtrip_bytes(values: np.ndarray) -> np.ndarray:
    """Encode to PNG16 in memory and decode again (round-trip test helper)."""
    values = np.asarray(values)
    buf = io.BytesIO()
    Image.fromarray(values.astype(np.uint16)).save(buf, format="PNG")
    buf.seek(0)
    return np.asarray(Image.open(buf)).astype(np.uint16)
