"""Synthetic sensor with known ground truth, for validation and demos.

The model is deliberately noise-free: each pixel responds with

    y = clamp(round(gain * photons + offset), 0, 2**bit_depth - 1)

where gain carries a radial vignette plus per-pixel jitter and offset is
a per-pixel dark level. Because the response is deterministic, any
residual after calibration + correction is attributable to the pipeline
itself, not to photon statistics. Optional stuck pixels exercise defect
detection and fallback.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bayer import CHANNELS, BayerPattern, channel_field
from .raw import RawImage, write_raw
from .spectra import (
    LEVEL_NAMES,
    N_LEVELS,
    PhotonTable,
    QeSet,
    Spectrum,
    photon_counts,
    save_qe_table,
    save_spectrum,
)
from .util import round_half_up

#: Nominal transmittance of the seven gray filters, L1..L7 (L7 is unfiltered).
GRAY_TRANSMITTANCES = (0.02, 0.05, 0.12, 0.25, 0.45, 0.70, 1.00)


@dataclass(frozen=True)
class SensorModel:
    """Deterministic per-pixel camera response."""

    pattern: BayerPattern
    bit_depth: int
    gain: np.ndarray
    offset: np.ndarray
    stuck_rows: np.ndarray
    stuck_cols: np.ndarray
    stuck_values: np.ndarray

    def __post_init__(self):
        if self.gain.shape != self.offset.shape or self.gain.ndim != 2:
            raise ValueError("gain and offset must be 2-D arrays of equal shape")
        for arr in (self.gain, self.offset, self.stuck_rows, self.stuck_cols, self.stuck_values):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gain.shape

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    def render(self, photons) -> RawImage:
        """Expose the sensor to a per-pixel photon field (or one scalar)."""
        p = np.broadcast_to(np.asarray(photons, dtype=np.float64), self.shape)
        y = round_half_up(self.gain * p + self.offset)
        y = np.clip(y, 0.0, float(self.max_value)).astype(np.uint16)
        if self.stuck_rows.size:
            y[self.stuck_rows, self.stuck_cols] = self.stuck_values
        return RawImage(y, self.bit_depth, self.pattern)

    def render_channels(self, per_channel) -> RawImage:
        """Expose to a flat field with one photon count per color channel."""
        field = channel_field(self.pattern, *self.shape, per_channel)
        return self.render(field)


def vignetted_model(
    width: int,
    height: int,
    pattern: BayerPattern = BayerPattern.RGGB,
    seed: int = 0,
    bit_depth: int = 12,
    gain_range: tuple[float, float] = (0.7, 1.0),
    gain_jitter: float = 0.05,
    offset_range: tuple[float, float] = (0.0, 300.0),
    n_defects: int = 0,
) -> SensorModel:
    """A sensor with quadratic radial vignetting and per-pixel variation.

    Gain falls from gain_range[1] at the center to gain_range[0] in the
    corners and every pixel gets a uniform relative jitter of up to
    +/- gain_jitter on top; offsets are uniform in offset_range. Stuck
    pixels (if any) hold a random constant regardless of illumination.
    """
    rng = np.random.default_rng(seed)
    gmin, gmax = gain_range
    if not 0.0 < gmin <= gmax:
        raise ValueError("gain_range must satisfy 0 < min <= max")
    y = (np.arange(height, dtype=np.float64) - (height - 1) / 2.0)[:, None]
    x = (np.arange(width, dtype=np.float64) - (width - 1) / 2.0)[None, :]
    r2 = y * y + x * x
    r2max = max(float(r2[0, 0]), 1.0)
    base = gmax - (gmax - gmin) * (r2 / r2max)
    jitter = 1.0 + rng.uniform(-gain_jitter, gain_jitter, size=(height, width))
    gain = base * jitter
    offset = rng.uniform(offset_range[0], offset_range[1], size=(height, width))
    if n_defects:
        flat = rng.choice(height * width, size=n_defects, replace=False)
        rows, cols = np.divmod(flat, width)
        values = rng.integers(0, (1 << bit_depth), size=n_defects, dtype=np.uint16)
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        values = np.empty(0, dtype=np.uint16)
    return SensorModel(
        pattern=pattern,
        bit_depth=bit_depth,
        gain=gain,
        offset=offset,
        stuck_rows=rows,
        stuck_cols=cols,
        stuck_values=values,
    )


def demo_level_spectra(full_scale: float = 3600.0):
    """Lamp-through-gray-filter spectra plus QE curves with a known table.

    Returns (level_spectra L1..L7, QeSet, PhotonTable). The lamp is a
    smooth two-lobe emission curve, the filters are neutral (scalar
    transmittance), and the amplitude is normalized so the brightest
    channel's unfiltered count equals full_scale. The table is computed
    from the exact arrays returned, so recomputing it after a text
    round trip gives bit-identical values.
    """
    wl = np.arange(380.0, 781.0, 2.0)
    lamp = np.exp(-(((wl - 480.0) / 90.0) ** 2)) + 0.8 * np.exp(
        -(((wl - 620.0) / 110.0) ** 2)
    )
    qe = QeSet(
        Spectrum(wl, 0.55 * np.exp(-(((wl - 600.0) / 55.0) ** 2))),
        Spectrum(wl, 0.60 * np.exp(-(((wl - 535.0) / 50.0) ** 2))),
        Spectrum(wl, 0.58 * np.exp(-(((wl - 540.0) / 52.0) ** 2))),
        Spectrum(wl, 0.50 * np.exp(-(((wl - 465.0) / 45.0) ** 2))),
    )
    probe = photon_counts(
        [Spectrum(wl, lamp * t) for t in GRAY_TRANSMITTANCES], qe
    )
    scale = full_scale / probe.full_scale_default()
    spectra = [Spectrum(wl, lamp * (t * scale)) for t in GRAY_TRANSMITTANCES]
    table = photon_counts(spectra, qe)
    return spectra, qe, table


def render_stack(model: SensorModel, table: PhotonTable) -> list[RawImage]:
    """The eight calibration exposures L0 (dark) .. L7 (unfiltered)."""
    return [model.render_channels(table.counts[:, k]) for k in range(N_LEVELS)]


def flat_scene(model: SensorModel, table: PhotonTable, fraction: float) -> np.ndarray:
    """Per-pixel photons of a flat field at the given fraction of each L7."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    return channel_field(model.pattern, *model.shape, fraction * table.counts[:, -1])


def ramp_scene(
    model: SensorModel,
    table: PhotonTable,
    lo: float = 0.1,
    hi: float = 0.9,
) -> np.ndarray:
    """Photons rising linearly across columns from lo to hi of each L7."""
    h, w = model.shape
    frac = lo + (hi - lo) * np.arange(w, dtype=np.float64) / max(w - 1, 1)
    scale = channel_field(model.pattern, h, w, table.counts[:, -1])
    return scale * frac[None, :]


def generate_dataset(
    outdir: str | Path,
    width: int = 256,
    height: int = 256,
    pattern: BayerPattern = BayerPattern.RGGB,
    seed: int = 0,
    n_defects: int = 0,
    full_scale: float = 3600.0,
    flat_fraction: float = 0.6,
) -> dict:
    """Write a complete synthetic acquisition to disk and return its truth.

    Layout under outdir:

        levels/L0.nraw .. L7.nraw   calibration stack
        spectra/L1.txt .. L7.txt    measured light per level
        spectra/qe.txt              five-column QE table
        scenes/flat.nraw, ramp.nraw test scenes
        scenes/<name>_photons.npy   ground-truth photon fields
        truth.json                  model parameters and photon table
    """
    outdir = Path(outdir)
    spectra, qe, table = demo_level_spectra(full_scale)
    model = vignetted_model(
        width, height, pattern=pattern, seed=seed, n_defects=n_defects
    )
    (outdir / "levels").mkdir(parents=True, exist_ok=True)
    (outdir / "spectra").mkdir(exist_ok=True)
    (outdir / "scenes").mkdir(exist_ok=True)
    for k, frame in enumerate(render_stack(model, table)):
        write_raw(frame, outdir / "levels" / f"L{k}.nraw")
    for k, spec in enumerate(spectra, start=1):
        save_spectrum(
            spec, outdir / "spectra" / f"L{k}.txt",
            header=f"synthetic lamp spectrum, gray filter level L{k}",
        )
    save_qe_table(qe, outdir / "spectra" / "qe.txt", header="synthetic sensor QE")
    scenes = {
        "flat": flat_scene(model, table, flat_fraction),
        "ramp": ramp_scene(model, table),
    }
    for name, photons in scenes.items():
        write_raw(model.render(photons), outdir / "scenes" / f"{name}.nraw")
        np.save(outdir / "scenes" / f"{name}_photons.npy", photons)
    truth = {
        "width": width,
        "height": height,
        "pattern": pattern.name,
        "bit_depth": model.bit_depth,
        "seed": seed,
        "n_defects": n_defects,
        "stuck_pixels": [
            [int(r), int(c), int(v)]
            for r, c, v in zip(model.stuck_rows, model.stuck_cols, model.stuck_values)
        ],
        "transmittances": list(GRAY_TRANSMITTANCES),
        "full_scale": table.full_scale_default(),
        "flat_fraction": flat_fraction,
        "photon_table": {
            ch: [float(v) for v in table.channel(ch)] for ch in CHANNELS
        },
        "levels": list(LEVEL_NAMES),
    }
    (outdir / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    return truth
