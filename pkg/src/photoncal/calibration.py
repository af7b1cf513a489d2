"""Per-pixel intensity -> photon calibration maps and the NCAL container.

Every pixel gets an 8-knot piecewise-linear curve: knot k pairs the
pixel's mean digital intensity under calibration level Lk with that
channel's photon count for Lk. Pixels whose knot intensities are not
strictly increasing (hot, dead, or saturated sites) are flagged
defective; at correction time they borrow the median curve of nearby
same-channel pixels.

NCAL layout (little-endian, see docs/FORMATS.md):

    magic "NCAL" | u8 version (=1) | u32 width | u32 height | u8 bayer |
    u32 metadata_len | metadata JSON | 4x8 f64 photon table |
    W*H x 8 u16 knot intensities (x16 fixed point) | W*H u8 defect flags |
    u32 CRC32 of everything before it
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .bayer import BayerPattern
from .errors import CalibrationError, FormatError
from .spectra import N_LEVELS, PhotonTable
from .util import round_half_up, strip_bounds

MAGIC = b"NCAL"
VERSION = 1
_FIXED_POINT = 16.0
_HEADER = struct.Struct("<4sBIIBI")

#: Above this defect fraction the stack is treated as corrupt, not calibratable.
MAX_DEFECT_FRACTION = 0.20


def mean_level_image(frames, center: int, half_window: int = 0) -> np.ndarray:
    """Per-pixel mean of the frames in [center - w, center + w], as float64.

    The window is symmetric around the (typically PIE-selected) in-focus
    frame; half_window = 0 keeps just that frame.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("empty frame stack")
    if half_window < 0:
        raise ValueError("half_window must be >= 0")
    lo, hi = center - half_window, center + half_window
    if lo < 0 or hi >= len(frames):
        raise ValueError(
            f"window [{lo}, {hi}] out of range for a stack of {len(frames)} frames"
        )
    shape = frames[0].samples.shape
    pattern = frames[0].pattern
    acc = np.zeros(shape, dtype=np.float64)
    n = 0
    for frame in frames[lo : hi + 1]:
        if frame.samples.shape != shape or frame.pattern is not pattern:
            raise ValueError("frames in a stack must share size and Bayer pattern")
        acc += frame.samples
        n += 1
    return acc / n


class CalibrationMap:
    """Immutable per-pixel calibration of one camera + optics setup.

    Knot intensities are float64 for freshly built maps and x16
    fixed-point uint16 (usually a read-only memmap) for maps loaded from
    NCAL; knot_block() hides the difference.
    """

    def __init__(
        self,
        pattern: BayerPattern,
        photon_table: PhotonTable,
        knots: np.ndarray,
        defect_mask: np.ndarray,
        metadata: dict | None = None,
    ):
        if knots.ndim != 3 or knots.shape[2] != N_LEVELS:
            raise ValueError(f"knots must have shape (H, W, {N_LEVELS}), got {knots.shape}")
        if defect_mask.shape != knots.shape[:2]:
            raise ValueError("defect mask shape does not match knots")
        if knots.dtype == np.uint16:
            self._fixed = True
        elif knots.dtype == np.float64:
            self._fixed = False
        else:
            raise ValueError(f"knots must be float64 or x16 uint16, got {knots.dtype}")
        self.pattern = pattern
        self.photon_table = photon_table
        self._knots = knots
        self.defect_mask = np.ascontiguousarray(defect_mask, dtype=bool)
        self.defect_mask.setflags(write=False)
        self.metadata = dict(metadata or {})
        self._fallback: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @property
    def height(self) -> int:
        return self._knots.shape[0]

    @property
    def width(self) -> int:
        return self._knots.shape[1]

    @property
    def defect_fraction(self) -> float:
        return float(self.defect_mask.mean())

    def knot_block(self, y0: int, y1: int) -> np.ndarray:
        """Knot intensities of rows [y0, y1) as float64 (rows, W, 8)."""
        block = self._knots[y0:y1]
        if self._fixed:
            return np.asarray(block, dtype=np.float64) / _FIXED_POINT
        return np.asarray(block)

    @property
    def knot_intensities(self) -> np.ndarray:
        """Full float64 knot array; fine for test-sized maps, avoid at full frame."""
        return self.knot_block(0, self.height)

    def fallback_curves(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Replacement knots for defective pixels: (rows, cols, knots (n, 8)).

        Each defective pixel takes the per-knot median over non-defective
        same-channel neighbors, searched on rings of the channel's own
        2x2-subsampled lattice and expanded until at least 3 donors are
        found. Deterministic; cached per map.
        """
        if self._fallback is None:
            self._fallback = _compute_fallbacks(self)
        return self._fallback

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CalibrationMap)
            and self.pattern is other.pattern
            and np.array_equal(self.photon_table.counts, other.photon_table.counts)
            and np.array_equal(self.knot_intensities, other.knot_intensities)
            and np.array_equal(self.defect_mask, other.defect_mask)
            and self.metadata == other.metadata
        )


def build_calibration(
    level_means,
    table: PhotonTable,
    pattern: BayerPattern,
    metadata: dict | None = None,
) -> CalibrationMap:
    """Assemble the per-pixel curves from the 8 mean level images L0..L7.

    A pixel is defective when its intensity sequence is not strictly
    increasing (any flat or inverted segment makes the curve
    non-invertible). Raises CalibrationError when more than 20% of pixels
    are defective, which signals a corrupt stack rather than sensor
    defects.
    """
    level_means = [np.asarray(m, dtype=np.float64) for m in level_means]
    if len(level_means) != N_LEVELS:
        raise ValueError(f"expected {N_LEVELS} level images, got {len(level_means)}")
    shape = level_means[0].shape
    if any(m.shape != shape for m in level_means):
        raise ValueError("level images must share dimensions")
    if len(shape) != 2:
        raise ValueError("level images must be 2-D")
    knots = np.stack(level_means, axis=-1)
    defect = np.zeros(shape, dtype=bool)
    for k in range(N_LEVELS - 1):
        defect |= knots[:, :, k + 1] <= knots[:, :, k]
    fraction = float(defect.mean())
    if fraction > MAX_DEFECT_FRACTION:
        raise CalibrationError(
            f"> {MAX_DEFECT_FRACTION:.0%} defective pixels ({fraction:.1%}): "
            "calibration stack looks corrupt"
        )
    return CalibrationMap(pattern, table, knots, defect, metadata)


def _compute_fallbacks(cal: CalibrationMap):
    rows_out: list[np.ndarray] = []
    cols_out: list[np.ndarray] = []
    knots_out: list[np.ndarray] = []
    for ch, (dy, dx) in cal.pattern.channel_offsets().items():
        sub_def = cal.defect_mask[dy::2, dx::2]
        ys, xs = np.nonzero(sub_def)
        if ys.size == 0:
            continue
        hc, wc = sub_def.shape
        sub_knots = cal._knots[dy::2, dx::2]
        scale = _FIXED_POINT if cal._fixed else 1.0
        donors = np.empty((0, ys.size, N_LEVELS), dtype=np.float64)
        resolved = np.zeros(ys.size, dtype=bool)
        repl = np.empty((ys.size, N_LEVELS), dtype=np.float64)
        radius = 0
        max_radius = max(hc, wc)
        while not resolved.all():
            radius += 1
            if radius > max_radius:
                raise CalibrationError(
                    f"channel {ch}: no non-defective donors found for some defective pixels"
                )
            ring = [
                (oy, ox)
                for oy in range(-radius, radius + 1)
                for ox in range(-radius, radius + 1)
                if max(abs(oy), abs(ox)) == radius
            ]
            layers = []
            for oy, ox in ring:
                cy, cx = ys + oy, xs + ox
                valid = (cy >= 0) & (cy < hc) & (cx >= 0) & (cx < wc)
                cyc, cxc = np.clip(cy, 0, hc - 1), np.clip(cx, 0, wc - 1)
                valid &= ~sub_def[cyc, cxc]
                vals = np.asarray(sub_knots[cyc, cxc], dtype=np.float64) / scale
                vals[~valid] = np.nan
                layers.append(vals)
            donors = np.concatenate([donors, np.stack(layers)], axis=0)
            have = np.sum(~np.isnan(donors[:, :, 0]), axis=0)
            ready = ~resolved & (have >= 3)
            if ready.any():
                repl[ready] = np.nanmedian(donors[:, ready], axis=0)
                resolved |= ready
        rows_out.append(ys * 2 + dy)
        cols_out.append(xs * 2 + dx)
        knots_out.append(repl)
    if not rows_out:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty((0, N_LEVELS), dtype=np.float64)
    return (
        np.concatenate(rows_out),
        np.concatenate(cols_out),
        np.concatenate(knots_out),
    )


def crop_calibration(cal: CalibrationMap, rect) -> CalibrationMap:
    """Restrict a map to a window, re-deriving the Bayer phase.

    Slicing keeps memory-mapped knots memory-mapped.
    """
    if rect.x0 + rect.w > cal.width or rect.y0 + rect.h > cal.height:
        raise ValueError(
            f"crop {rect} out of bounds for {cal.width}x{cal.height} map"
        )
    knots = cal._knots[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
    defect = cal.defect_mask[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
    pattern = cal.pattern.shifted(rect.x0 % 2, rect.y0 % 2)
    return CalibrationMap(pattern, cal.photon_table, knots, defect, cal.metadata)


def save_calibration(cal: CalibrationMap, path: str | Path) -> None:
    """Write the NCAL container (atomic; knots quantized to 1/16 count)."""
    meta_bytes = json.dumps(cal.metadata, sort_keys=True).encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, cal.width, cal.height, cal.pattern.value, len(meta_bytes)
    )
    table_bytes = cal.photon_table.counts.astype("<f8").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".ncal.tmp")
    crc = 0
    try:
        with os.fdopen(fd, "wb") as fh:
            for chunk in (header, meta_bytes, table_bytes):
                fh.write(chunk)
                crc = zlib.crc32(chunk, crc)
            for y0, y1 in strip_bounds(cal.height):
                block = cal.knot_block(y0, y1)
                q = round_half_up(block * _FIXED_POINT)
                if q.max(initial=0.0) > 65535.0 or q.min(initial=0.0) < 0.0:
                    raise ValueError(
                        "knot intensity outside NCAL fixed-point range "
                        "(supports < 4096 counts, i.e. bit depths <= 12)"
                    )
                chunk = q.astype("<u2").tobytes()
                fh.write(chunk)
                crc = zlib.crc32(chunk, crc)
            chunk = cal.defect_mask.astype(np.uint8).tobytes()
            fh.write(chunk)
            crc = zlib.crc32(chunk, crc)
            fh.write(struct.pack("<I", crc))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_calibration(path: str | Path, mmap: bool = True) -> CalibrationMap:
    """Read an NCAL file back, verifying the trailing CRC32.

    With mmap=True (default) the knot block is memory-mapped read-only,
    so full-frame maps do not cost heap memory.
    """
    path = Path(path)
    size = path.stat().st_size
    if size < _HEADER.size + 4:
        raise FormatError(f"{path}: file shorter than NCAL header")
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, width, height, bayer_code, meta_len = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, not an NCAL file")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported NCAL version {version}")
        meta_bytes = fh.read(meta_len)
        if len(meta_bytes) != meta_len:
            raise FormatError(f"{path}: truncated metadata block")
        table_bytes = fh.read(4 * N_LEVELS * 8)
        if len(table_bytes) != 4 * N_LEVELS * 8:
            raise FormatError(f"{path}: truncated photon table")
    expected = (
        _HEADER.size + meta_len + 4 * N_LEVELS * 8
        + width * height * (2 * N_LEVELS + 1) + 4
    )
    if size != expected:
        raise FormatError(
            f"{path}: wrong file size {size}, expected {expected} "
            f"for a {width}x{height} map"
        )
    _verify_crc(path, size)
    try:
        pattern = BayerPattern.from_code(bayer_code)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    try:
        metadata = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad metadata block ({exc})") from None
    table = PhotonTable(
        np.frombuffer(table_bytes, dtype="<f8").reshape(4, N_LEVELS).copy()
    )
    knots_offset = _HEADER.size + meta_len + 4 * N_LEVELS * 8
    defect_offset = knots_offset + width * height * 2 * N_LEVELS
    if mmap:
        knots = np.memmap(
            path, dtype="<u2", mode="r", offset=knots_offset,
            shape=(height, width, N_LEVELS),
        )
    else:
        with open(path, "rb") as fh:
            fh.seek(knots_offset)
            knots = np.fromfile(fh, dtype="<u2", count=width * height * N_LEVELS)
        knots = knots.reshape(height, width, N_LEVELS).astype(np.uint16)
    with open(path, "rb") as fh:
        fh.seek(defect_offset)
        defect = np.fromfile(fh, dtype=np.uint8, count=width * height)
    defect_mask = defect.reshape(height, width) != 0
    return CalibrationMap(pattern, table, knots, defect_mask, metadata)


def _verify_crc(path: Path, size: int) -> None:
    crc = 0
    remaining = size - 4
    with open(path, "rb") as fh:
        while remaining > 0:
            chunk = fh.read(min(1 << 22, remaining))
            if not chunk:
                raise FormatError(f"{path}: unexpected end of file")
            remaining -= len(chunk)
            crc = zlib.crc32(chunk, crc)
        stored = struct.unpack("<I", fh.read(4))[0]
    if crc != stored:
        raise FormatError(f"{path}: checksum failure (stored {stored:#010x}, computed {crc:#010x})")


def read_calibration_header(path: str | Path) -> dict:
    """Header fields only, without CRC verification (used by `inspect`)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: file shorter than NCAL header")
        magic, version, width, height, bayer_code, meta_len = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, not an NCAL file")
        meta = json.loads(fh.read(meta_len).decode("utf-8")) if meta_len else {}
    return {
        "version": version,
        "width": width,
        "height": height,
        "pattern": BayerPattern.from_code(bayer_code).name,
        "metadata": meta,
    }


def expected_ncal_size(width: int, height: int, metadata: dict | None = None) -> int:
    """Size formula: header + W*H*(8*2 + 1) bytes (+4 CRC)."""
    meta_len = len(json.dumps(dict(metadata or {}), sort_keys=True).encode("utf-8"))
    return (
        _HEADER.size + meta_len + 4 * N_LEVELS * 8
        + width * height * (2 * N_LEVELS + 1) + 4
    )
