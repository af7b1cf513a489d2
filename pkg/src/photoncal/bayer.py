"""Bayer color-filter-array addressing.

A mosaic frame carries one sample per pixel; which of the four sensor
channels (R, G1, G2, B) a pixel belongs to is a pure function of the
pixel parity (x mod 2, y mod 2) and the pattern code. G1 is the green
site sharing a row with red, G2 the one sharing a row with blue.
"""

from __future__ import annotations

import enum

import numpy as np

#: Canonical channel order used for every per-channel table in the package.
CHANNELS = ("R", "G1", "G2", "B")

# 2x2 layout per pattern, indexed by quadrant q = (y % 2) * 2 + (x % 2).
_LAYOUTS = {
    "RGGB": ("R", "G1", "G2", "B"),
    "GRBG": ("G1", "R", "B", "G2"),
    "GBRG": ("G2", "B", "R", "G1"),
    "BGGR": ("B", "G2", "G1", "R"),
}


class BayerPattern(enum.Enum):
    """Mosaic phase of the color filter array.

    The integer values are the on-disk codes used by the NRAW and NCAL
    containers (see docs/FORMATS.md).
    """

    RGGB = 0
    GRBG = 1
    GBRG = 2
    BGGR = 3

    def channel_of(self, x: int, y: int) -> str:
        """Channel name at pixel column ``x``, row ``y``."""
        return _LAYOUTS[self.name][(y % 2) * 2 + (x % 2)]

    def channel_offsets(self) -> dict[str, tuple[int, int]]:
        """Map channel name -> (row offset, column offset) of its 2x2 site."""
        layout = _LAYOUTS[self.name]
        return {layout[q]: (q // 2, q % 2) for q in range(4)}

    def shifted(self, dx: int, dy: int) -> "BayerPattern":
        """Pattern seen after dropping ``dx`` columns and ``dy`` rows.

        Cropping at an odd offset changes which channel sits at (0, 0);
        this returns the code that keeps channel_of consistent.
        """
        layout = _LAYOUTS[self.name]
        new = tuple(
            layout[((y + dy) % 2) * 2 + ((x + dx) % 2)] for y in (0, 1) for x in (0, 1)
        )
        for name, cand in _LAYOUTS.items():
            if cand == new:
                return BayerPattern[name]
        raise AssertionError("unreachable: every parity shift of a Bayer layout is a Bayer layout")

    @classmethod
    def from_code(cls, code: int) -> "BayerPattern":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown Bayer code {code}") from None

    @classmethod
    def from_name(cls, name: str) -> "BayerPattern":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown Bayer pattern {name!r} (expected one of {list(_LAYOUTS)})") from None


def channel_index_map(pattern: BayerPattern, height: int, width: int) -> np.ndarray:
    """(height, width) uint8 array of channel indices into CHANNELS."""
    cidx = np.empty((height, width), dtype=np.uint8)
    for ch, (dy, dx) in pattern.channel_offsets().items():
        cidx[dy::2, dx::2] = CHANNELS.index(ch)
    return cidx


def channel_field(
    pattern: BayerPattern, height: int, width: int, per_channel: np.ndarray
) -> np.ndarray:
    """Expand four per-channel values into a full (height, width) float field."""
    per_channel = np.asarray(per_channel, dtype=np.float64)
    if per_channel.shape != (4,):
        raise ValueError("per_channel must have exactly 4 values (R, G1, G2, B)")
    return per_channel[channel_index_map(pattern, height, width)]
