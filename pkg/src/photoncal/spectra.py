"""Sampled light spectra and per-level photon counts.

The calibration's physical scale comes from spectrometer measurements of
the gray-filter transmissions, multiplied per channel by the sensor's
quantum-efficiency curve and integrated over wavelength (trapezoidal
rule). Counts are relative: spectrometer counts x QE fraction x nm. No
per-photon energy weighting is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bayer import CHANNELS

#: Number of calibration levels, dark L0 through unfiltered L7.
N_LEVELS = 8

LEVEL_NAMES = tuple(f"L{k}" for k in range(N_LEVELS))


@dataclass(frozen=True)
class Spectrum:
    """Sampled wavelength -> value curve, linear between samples.

    Wavelengths are nm and must be strictly increasing; values are
    non-negative (relative flux, transmittance, or QE fraction).
    """

    wavelengths: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if wl.ndim != 1 or v.ndim != 1 or wl.shape != v.shape:
            raise ValueError("wavelengths and values must be equal-length 1-D arrays")
        if wl.size < 2:
            raise ValueError(f"a spectrum needs >= 2 samples, got {wl.size}")
        if not np.all(np.diff(wl) > 0):
            raise ValueError("wavelengths not increasing")
        if np.any(v < 0):
            raise ValueError("spectrum values must be non-negative")
        wl.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", v)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.wavelengths[0]), float(self.wavelengths[-1])

    def __len__(self) -> int:
        return self.wavelengths.size


def load_spectrum(path: str | Path) -> Spectrum:
    """Load a two-column (wavelength_nm, value) text table.

    Lines starting with '#' are comments. Row order is validated, not
    silently re-sorted: a spectrometer export with shuffled rows is a
    sign something upstream went wrong.
    """
    try:
        table = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: cannot parse spectrum table ({exc})") from None
    if table.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns, got {table.shape[1]}")
    if table.shape[0] < 2:
        raise ValueError(f"{path}: a spectrum needs >= 2 rows, got {table.shape[0]}")
    if not np.all(np.diff(table[:, 0]) > 0):
        raise ValueError(f"{path}: wavelengths not increasing")
    if np.any(table[:, 1] < 0):
        raise ValueError(f"{path}: negative spectrum values")
    return Spectrum(table[:, 0], table[:, 1])


def save_spectrum(s: Spectrum, path: str | Path, header: str = "") -> None:
    """Write the two-column text form accepted by load_spectrum."""
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    # 17 significant digits so float64 values survive a save/load round trip.
    lines.extend(f"{wl:.17g} {v:.17g}" for wl, v in zip(s.wavelengths, s.values))
    Path(path).write_text("\n".join(lines) + "\n")


def sample_at(s: Spectrum, wavelengths) -> np.ndarray:
    """Evaluate the piecewise-linear curve at the given wavelengths.

    No extrapolation: every query must lie inside the support.
    """
    grid = np.atleast_1d(np.asarray(wavelengths, dtype=np.float64))
    lo, hi = s.support
    if grid.size == 0:
        raise ValueError("empty wavelength grid")
    if grid.min() < lo or grid.max() > hi:
        raise ValueError(
            f"grid point outside support [{lo}, {hi}]: "
            f"queried [{grid.min()}, {grid.max()}]"
        )
    return np.interp(grid, s.wavelengths, s.values)


def resample(s: Spectrum, grid) -> Spectrum:
    """Linear-interpolate a spectrum onto a new wavelength grid.

    The grid must lie within the support (no extrapolation) and contain
    at least two strictly increasing points so the result is a valid
    Spectrum; use sample_at for single-point evaluation.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("resample grid must be 1-D with >= 2 points")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("resample grid must be strictly increasing")
    return Spectrum(grid, sample_at(s, grid))


def multiply(light: Spectrum, qe: Spectrum) -> Spectrum:
    """Pointwise product on the intersection of supports.

    The common grid is the union of both spectra's sample points inside
    the intersection (endpoints included), so neither tabulation loses
    resolution and the operation commutes.
    """
    lo = max(light.support[0], qe.support[0])
    hi = min(light.support[1], qe.support[1])
    if not lo < hi:
        raise ValueError(
            f"empty wavelength intersection: [{light.support[0]}, {light.support[1]}] "
            f"vs [{qe.support[0]}, {qe.support[1]}]"
        )
    pts = np.union1d(light.wavelengths, qe.wavelengths)
    pts = pts[(pts >= lo) & (pts <= hi)]
    grid = np.union1d(pts, np.array([lo, hi]))
    return Spectrum(grid, sample_at(light, grid) * sample_at(qe, grid))


def integrate_trapezoid(s: Spectrum) -> float:
    """Area under the curve: sum of (v_i + v_{i+1})/2 * (wl_{i+1} - wl_i)."""
    v = s.values
    return float(np.sum((v[:-1] + v[1:]) * 0.5 * np.diff(s.wavelengths)))


@dataclass(frozen=True)
class QeSet:
    """Quantum-efficiency curve per sensor channel (fractions in [0, 1])."""

    r: Spectrum
    g1: Spectrum
    g2: Spectrum
    b: Spectrum

    def __post_init__(self):
        for name, s in zip(CHANNELS, (self.r, self.g1, self.g2, self.b)):
            if np.any(s.values > 1.0):
                raise ValueError(f"QE curve for {name} exceeds 1.0 (not an efficiency)")

    def channel(self, name: str) -> Spectrum:
        return {"R": self.r, "G1": self.g1, "G2": self.g2, "B": self.b}[name]

    @classmethod
    def from_rgb(cls, r: Spectrum, g: Spectrum, b: Spectrum) -> "QeSet":
        """Sensor data sheets usually give one green curve; use it for both sites."""
        return cls(r, g, g, b)


def load_qe_table(path: str | Path) -> QeSet:
    """Load a five-column table: wavelength_nm, QE_R, QE_G1, QE_G2, QE_B."""
    table = np.loadtxt(path, comments="#", ndmin=2)
    if table.shape[1] != 5:
        raise ValueError(f"{path}: expected 5 columns (wavelength + 4 QE), got {table.shape[1]}")
    wl = table[:, 0]
    return QeSet(*(Spectrum(wl, table[:, 1 + i]) for i in range(4)))


def save_qe_table(qe: QeSet, path: str | Path, header: str = "") -> None:
    """Write the five-column form accepted by load_qe_table.

    All four curves must share one wavelength grid (the file format has a
    single wavelength column).
    """
    wl = qe.r.wavelengths
    curves = [qe.channel(ch) for ch in CHANNELS]
    if any(not np.array_equal(s.wavelengths, wl) for s in curves):
        raise ValueError("QE curves must share one wavelength grid to save as a table")
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    lines.append("# wavelength_nm QE_R QE_G1 QE_G2 QE_B")
    for i in range(wl.size):
        row = " ".join(f"{s.values[i]:.17g}" for s in curves)
        lines.append(f"{wl[i]:.17g} {row}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PhotonTable:
    """Relative photon counts per channel per calibration level.

    counts has shape (4, 8): rows in CHANNELS order, columns L0..L7.
    L0 is dark by definition (exactly zero), and counts never decrease
    with level because the gray filters are ordered by opacity.
    """

    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64)
        if c.shape != (4, N_LEVELS):
            raise ValueError(f"counts must have shape (4, {N_LEVELS}), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("photon counts must be non-negative")
        if np.any(c[:, 0] != 0.0):
            raise ValueError("L0 (dark) photon count must be exactly 0")
        diffs = np.diff(c, axis=1)
        if np.any(diffs < 0):
            ch, k = np.argwhere(diffs < 0)[0]
            raise ValueError(
                f"photon counts decrease for channel {CHANNELS[ch]} "
                f"between L{k} and L{k + 1}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def channel(self, name: str) -> np.ndarray:
        return self.counts[CHANNELS.index(name)]

    def full_scale_default(self) -> float:
        """Photon count mapped to code 16383: the largest L7 count of any channel."""
        return float(self.counts[:, -1].max())

    def format_text(self) -> str:
        rows = ["level " + " ".join(f"{ch:>14s}" for ch in CHANNELS)]
        for k in range(N_LEVELS):
            rows.append(
                f"{LEVEL_NAMES[k]:<5s} "
                + " ".join(f"{self.counts[c, k]:14.6f}" for c in range(4))
            )
        return "\n".join(rows)


def photon_counts(level_spectra, qe: QeSet) -> PhotonTable:
    """Build the photon table from the seven measured level spectra L1..L7.

    counts[ch][Lk] = trapezoid integral of (level_k spectrum x QE_ch);
    L0 is dark and contributes exactly zero. Raises if the result is not
    non-decreasing across levels for every channel.
    """
    level_spectra = list(level_spectra)
    if len(level_spectra) != N_LEVELS - 1:
        raise ValueError(f"expected {N_LEVELS - 1} level spectra (L1..L7), got {len(level_spectra)}")
    counts = np.zeros((4, N_LEVELS), dtype=np.float64)
    for ci, ch in enumerate(CHANNELS):
        for k, spec in enumerate(level_spectra, start=1):
            counts[ci, k] = integrate_trapezoid(multiply(spec, qe.channel(ch)))
    return PhotonTable(counts)
