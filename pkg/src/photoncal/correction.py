"""Raw mosaic -> per-pixel photon counts via the calibration map.

Each pixel's digital value is located inside its own 8-knot intensity
curve and mapped by linear interpolation onto the photon counts of the
pixel's color channel. Values below the L0 knot clamp to 0 photons,
values above the L7 knot clamp to the L7 photon count; both cases are
counted and reported. Defective pixels use their map's fallback curves.
"""

from __future__ import annotations

import bisect
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bayer import BayerPattern, channel_index_map
from .calibration import CalibrationMap
from .raw import RawImage
from .spectra import N_LEVELS
from .util import round_half_up, strip_bounds

QUANT_BITS = 14
QUANT_MAX = (1 << QUANT_BITS) - 1


@dataclass(frozen=True)
class PhotonImage:
    """A corrected image: float64 photons per pixel, still mosaicked."""

    values: np.ndarray
    pattern: BayerPattern
    full_scale: float
    clamped_low: int = 0
    clamped_high: int = 0
    fallback_pixels: int = 0

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("photon image must be 2-D")
        if self.full_scale <= 0:
            raise ValueError("full_scale must be positive")
        self.values.setflags(write=False)

    def sidecar(self) -> dict:
        """Summary written next to the quantized PNG."""
        return {
            "full_scale": self.full_scale,
            "quant_bits": QUANT_BITS,
            "pattern": self.pattern.name,
            "clamped_low": self.clamped_low,
            "clamped_high": self.clamped_high,
            "fallback_pixels": self.fallback_pixels,
        }


def correct_pixel(value: float, knots, photons) -> float:
    """Scalar reference for one pixel; the array path must agree with this.

    knots and photons are the pixel's 8 intensity knots and the 8 photon
    counts of its channel.
    """
    knots = [float(k) for k in knots]
    photons = [float(p) for p in photons]
    v = float(value)
    if v <= knots[0]:
        return photons[0]
    if v >= knots[-1]:
        return photons[-1]
    k = bisect.bisect_right(knots, v) - 1
    lo, hi = knots[k], knots[k + 1]
    if hi <= lo:
        return photons[k + 1] if v >= hi else photons[k]
    t = (v - lo) / (hi - lo)
    return photons[k] + t * (photons[k + 1] - photons[k])


def _correct_block(v, knots, plo_phi, counts_mask):
    """Vectorized correction of one strip.

    v: (rows, W) float64 raw values; knots: (rows, W, 8) float64;
    plo_phi: (rows, W, 8) float64 per-pixel channel photon rows;
    counts_mask: (rows, W) bool, True where clamps should be counted.
    Returns (photons, n_below, n_above).
    """
    idx = np.zeros(v.shape, dtype=np.int8)
    for j in range(N_LEVELS):
        idx += knots[:, :, j] <= v
    k = np.clip(idx - 1, 0, N_LEVELS - 2).astype(np.intp)
    kk = k[:, :, None]
    lo = np.take_along_axis(knots, kk, axis=2)[:, :, 0]
    hi = np.take_along_axis(knots, kk + 1, axis=2)[:, :, 0]
    plo = np.take_along_axis(plo_phi, kk, axis=2)[:, :, 0]
    phi = np.take_along_axis(plo_phi, kk + 1, axis=2)[:, :, 0]
    denom = hi - lo
    ok = denom > 0.0
    t = np.where(ok, (v - lo) / np.where(ok, denom, 1.0), (v >= hi).astype(np.float64))
    p = plo + t * (phi - plo)
    below = idx == 0
    above = idx == N_LEVELS
    p = np.where(below, plo_phi[:, :, 0], p)
    p = np.where(above, plo_phi[:, :, -1], p)
    n_below = int(np.count_nonzero(below & counts_mask))
    n_above = int(np.count_nonzero(above & counts_mask))
    return p, n_below, n_above


def correct_image(
    image: RawImage,
    cal: CalibrationMap,
    full_scale: float | None = None,
    workers: int = 1,
) -> PhotonImage:
    """Convert a raw mosaic image to photon counts (strip-wise, float64).

    workers > 1 splits the fixed 256-row strips over threads; the strip
    boundaries and the per-strip arithmetic do not depend on the worker
    count, so results are bit-identical for any value.
    """
    if image.samples.shape != (cal.height, cal.width):
        raise ValueError(
            f"image is {image.samples.shape[1]}x{image.samples.shape[0]} but the "
            f"calibration map is {cal.width}x{cal.height}"
        )
    if image.pattern is not cal.pattern:
        raise ValueError(
            f"image Bayer pattern {image.pattern.name} does not match "
            f"calibration map pattern {cal.pattern.name}"
        )
    h, w = cal.height, cal.width
    cidx = channel_index_map(cal.pattern, h, w)
    table = cal.photon_table.counts
    defect = cal.defect_mask
    out = np.empty((h, w), dtype=np.float64)
    totals = np.zeros(2, dtype=np.int64)

    def run_strip(bounds):
        y0, y1 = bounds
        v = image.samples[y0:y1].astype(np.float64)
        knots = cal.knot_block(y0, y1)
        rows = table[cidx[y0:y1]]
        p, n_below, n_above = _correct_block(v, knots, rows, ~defect[y0:y1])
        out[y0:y1] = p
        return n_below, n_above

    strips = strip_bounds(h)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_strip, strips))
    else:
        results = [run_strip(b) for b in strips]
    for n_below, n_above in results:
        totals += (n_below, n_above)

    rows_d, cols_d, fk = cal.fallback_curves()
    if rows_d.size:
        v = image.samples[rows_d, cols_d].astype(np.float64)
        prow = table[cidx[rows_d, cols_d]]
        p, n_below, n_above = _interp_pointwise(v, fk, prow)
        out[rows_d, cols_d] = p
        totals += (n_below, n_above)

    if full_scale is None:
        full_scale = cal.photon_table.full_scale_default()
    return PhotonImage(
        values=out,
        pattern=cal.pattern,
        full_scale=float(full_scale),
        clamped_low=int(totals[0]),
        clamped_high=int(totals[1]),
        fallback_pixels=int(rows_d.size),
    )


def _interp_pointwise(v, knots, photons):
    """Same arithmetic as _correct_block for a flat list of pixels.

    v: (n,), knots: (n, 8), photons: (n, 8).
    """
    idx = np.zeros(v.shape, dtype=np.int8)
    for j in range(N_LEVELS):
        idx += knots[:, j] <= v
    k = np.clip(idx - 1, 0, N_LEVELS - 2).astype(np.intp)
    ar = np.arange(v.size)
    lo, hi = knots[ar, k], knots[ar, k + 1]
    plo, phi = photons[ar, k], photons[ar, k + 1]
    denom = hi - lo
    ok = denom > 0.0
    t = np.where(ok, (v - lo) / np.where(ok, denom, 1.0), (v >= hi).astype(np.float64))
    p = plo + t * (phi - plo)
    below = idx == 0
    above = idx == N_LEVELS
    p = np.where(below, photons[:, 0], p)
    p = np.where(above, photons[:, -1], p)
    return p, int(np.count_nonzero(below)), int(np.count_nonzero(above))


def quantize14(values: np.ndarray, full_scale: float) -> np.ndarray:
    """Map photons [0, full_scale] onto 14-bit codes 0..16383 (uint16).

    code = floor(16383 * min(v, full_scale) / full_scale + 0.5); photons
    above full scale saturate at 16383.
    """
    if full_scale <= 0:
        raise ValueError("full_scale must be positive")
    v = np.minimum(np.asarray(values, dtype=np.float64), full_scale)
    codes = round_half_up(QUANT_MAX * v / full_scale)
    return codes.astype(np.uint16)


def dequantize14(codes: np.ndarray, full_scale: float) -> np.ndarray:
    """Inverse of quantize14 up to quantization error: v = code/16383 * fs."""
    if full_scale <= 0:
        raise ValueError("full_scale must be positive")
    return np.asarray(codes, dtype=np.float64) * (full_scale / QUANT_MAX)
