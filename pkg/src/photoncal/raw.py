"""Raw mosaic frames and the NRAW container.

NRAW is a deliberately plain format: a fixed little-endian header followed
by row-major u16 samples, so frames round-trip bit-exactly and can be
produced or parsed by anything. Layout (see docs/FORMATS.md):

    magic "NRAW" | u8 version (=1) | u32 width | u32 height |
    u8 bit_depth | u8 bayer code | width*height u16 samples
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bayer import BayerPattern
from .errors import FormatError
from .util import atomic_write_bytes

MAGIC = b"NRAW"
VERSION = 1
_HEADER = struct.Struct("<4sBIIBB")


@dataclass(frozen=True)
class CropRect:
    """Pixel-aligned crop window: offset (x0, y0), extent (w, h)."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"crop extent must be positive, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"crop offset must be non-negative, got ({self.x0}, {self.y0})")

    @classmethod
    def parse(cls, text: str) -> "CropRect":
        """Parse the CLI form ``x0,y0,w,h``."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected crop as x0,y0,w,h, got {text!r}")
        return cls(*(int(p) for p in parts))


class RawImage:
    """Single-channel-per-pixel mosaic frame.

    Samples are held as a read-only uint16 array of shape (height, width);
    every sample is validated against ``2**bit_depth``.
    """

    def __init__(self, samples: np.ndarray, bit_depth: int, pattern: BayerPattern):
        samples = np.asarray(samples)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {samples.shape}")
        if not np.issubdtype(samples.dtype, np.integer):
            raise ValueError(f"samples must be integer, got dtype {samples.dtype}")
        if not 8 <= bit_depth <= 16:
            raise ValueError(f"bit_depth must be in 8..16, got {bit_depth}")
        if samples.size and int(samples.min()) < 0:
            raise ValueError("samples must be non-negative")
        if samples.size and int(samples.max()) >= (1 << bit_depth):
            raise ValueError(
                f"sample out of range: max {int(samples.max())} >= 2^{bit_depth}"
            )
        arr = samples.astype(np.uint16, copy=True)
        arr.setflags(write=False)
        self.samples = arr
        self.bit_depth = int(bit_depth)
        self.pattern = pattern

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    def channel_view(self, channel: str) -> np.ndarray:
        """Read-only view of the sites belonging to one Bayer channel."""
        dy, dx = self.pattern.channel_offsets()[channel]
        return self.samples[dy::2, dx::2]

    def split_planes(self) -> dict[str, np.ndarray]:
        """All four channel sub-planes, keyed by channel name."""
        return {ch: self.channel_view(ch) for ch in self.pattern.channel_offsets()}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RawImage)
            and self.bit_depth == other.bit_depth
            and self.pattern is other.pattern
            and np.array_equal(self.samples, other.samples)
        )


def crop(image: RawImage, rect: CropRect) -> RawImage:
    """Crop a mosaic frame, re-deriving the Bayer phase for odd offsets."""
    if rect.x0 + rect.w > image.width or rect.y0 + rect.h > image.height:
        raise ValueError(
            f"crop {rect} out of bounds for {image.width}x{image.height} image"
        )
    sub = image.samples[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
    return RawImage(sub, image.bit_depth, image.pattern.shifted(rect.x0 % 2, rect.y0 % 2))


def crop_array(values: np.ndarray, rect: CropRect) -> np.ndarray:
    """Crop a plain (H, W) or (H, W, C) array with bounds checking."""
    h, w = values.shape[:2]
    if rect.x0 + rect.w > w or rect.y0 + rect.h > h:
        raise ValueError(f"crop {rect} out of bounds for {w}x{h} image")
    return values[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]


def write_raw(image: RawImage, path: str | Path) -> None:
    """Serialize to the NRAW container (atomic write)."""
    header = _HEADER.pack(
        MAGIC, VERSION, image.width, image.height, image.bit_depth, image.pattern.value
    )
    body = image.samples.astype("<u2").tobytes()
    atomic_write_bytes(path, header + body)


def read_raw(path: str | Path) -> RawImage:
    """Parse an NRAW file, validating header and sample range."""
    data = Path(path).read_bytes()
    return _parse_raw(data, str(path))


def _parse_raw(data: bytes, label: str) -> RawImage:
    if len(data) < _HEADER.size:
        raise FormatError(f"{label}: file shorter than NRAW header")
    magic, version, width, height, bit_depth, bayer_code = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{label}: bad magic {magic!r}, not an NRAW file")
    if version != VERSION:
        raise FormatError(f"{label}: unsupported NRAW version {version}")
    if width == 0 or height == 0:
        raise FormatError(f"{label}: zero image dimension {width}x{height}")
    if not 8 <= bit_depth <= 16:
        raise FormatError(f"{label}: bit depth {bit_depth} outside 8..16")
    try:
        pattern = BayerPattern.from_code(bayer_code)
    except ValueError as exc:
        raise FormatError(f"{label}: {exc}") from None
    expected = width * height * 2
    payload = data[_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{label}: truncated sample data, expected {expected} bytes, got {len(payload)}"
        )
    samples = np.frombuffer(payload, dtype="<u2").reshape(height, width)
    if samples.size and int(samples.max()) >= (1 << bit_depth):
        raise FormatError(
            f"{label}: sample out of range: {int(samples.max())} >= 2^{bit_depth}"
        )
    return RawImage(samples, bit_depth, pattern)


def read_raw_header(path: str | Path) -> dict:
    """Header fields only, without loading samples (used by `inspect`)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than NRAW header")
    magic, version, width, height, bit_depth, bayer_code = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, not an NRAW file")
    return {
        "version": version,
        "width": width,
        "height": height,
        "bit_depth": bit_depth,
        "pattern": BayerPattern.from_code(bayer_code).name,
    }


def raw_to_bytes(image: RawImage) -> bytes:
    """NRAW serialization to memory (test helper for round-trip checks)."""
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, image.width, image.height, image.bit_depth, image.pattern.value))
    buf.write(image.samples.astype("<u2").tobytes())
    return buf.getvalue()
