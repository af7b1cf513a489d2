"""Least-information-loss conversion of deep images to 8 bits per channel.

Instead of scaling (which merges distinct levels) or histogram
equalization (which distorts relative brightness), LIL ranks the levels
that actually occur and spreads those ranks evenly over 0..255. Distinct
input levels stay distinct whenever the image has at most 256 of them,
and the mapping is monotone so ordering is never inverted.

Levels can be pooled per color group (mosaic channels R, G1, G2, B or
RGB planes) or jointly over the whole image, and over a single image or
a whole series (one shared mapping, e.g. for a focus stack).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayer import CHANNELS
from .errors import ScopeError
from .raw import RawImage
from .util import round_half_up

MODES = ("per_channel", "joint")
SCOPES = ("single", "series")
JOINT_GROUP = "all"
RGB_GROUPS = ("R", "G", "B")


def _levels_of(item) -> int:
    if isinstance(item, RawImage):
        return 1 << item.bit_depth
    arr = np.asarray(item)
    if arr.dtype == np.uint8:
        return 1 << 8
    if arr.dtype == np.uint16:
        return 1 << 16
    raise ValueError(f"LIL input must be uint8 or uint16, got {arr.dtype}")


def _iter_groups(item, mode: str):
    """Yield (group name, values) pairs for one image.

    Grayscale images always form the single group "all"; per-channel
    grouping only distinguishes mosaic channels or RGB planes.
    """
    if isinstance(item, RawImage):
        if mode == "per_channel":
            for ch in CHANNELS:
                yield ch, item.channel_view(ch)
        else:
            yield JOINT_GROUP, item.samples
        return
    arr = np.asarray(item)
    if arr.ndim == 2:
        yield JOINT_GROUP, arr
    elif arr.ndim == 3 and arr.shape[2] == 3:
        if mode == "per_channel":
            for c, name in enumerate(RGB_GROUPS):
                yield name, arr[:, :, c]
        else:
            yield JOINT_GROUP, arr
    else:
        raise ValueError(f"LIL input must be 2-D or (H, W, 3), got shape {arr.shape}")


def occupancy(item, mode: str = "per_channel") -> dict[str, np.ndarray]:
    """Boolean occupancy vectors (length 2**bit_depth) per group."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n = _levels_of(item)
    out = {}
    for name, values in _iter_groups(item, mode):
        counts = np.bincount(np.asarray(values).ravel(), minlength=n)
        out[name] = counts > 0
    return out


def collect_levels(items, mode: str = "per_channel") -> dict[str, np.ndarray]:
    """Union of occupied levels per group over a series of images.

    The union is associative and commutative, so the result does not
    depend on frame order or how a series is batched.
    """
    items = list(items)
    if not items:
        raise ValueError("no images to collect levels from")
    merged: dict[str, np.ndarray] = {}
    for item in items:
        for name, occ in occupancy(item, mode).items():
            if name in merged:
                a, b = merged[name], occ
                if a.size != b.size:
                    size = max(a.size, b.size)
                    a = np.pad(a, (0, size - a.size))
                    b = np.pad(b, (0, size - b.size))
                merged[name] = a | b
            else:
                merged[name] = occ
    return {name: np.flatnonzero(occ) for name, occ in merged.items()}


@dataclass(frozen=True)
class LilGroup:
    """One group's mapping: sorted occupied levels and their 8-bit codes."""

    name: str
    levels: np.ndarray
    codes: np.ndarray

    def table(self) -> np.ndarray:
        """Dense lookup, -1 marks levels outside the scope."""
        table = np.full(int(self.levels[-1]) + 1, -1, dtype=np.int16)
        table[self.levels] = self.codes
        return table


class LilLut:
    """Per-group rank mapping built from collected levels."""

    def __init__(self, levels_by_group: dict[str, np.ndarray], mode: str):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.groups: dict[str, LilGroup] = {}
        for name, levels in levels_by_group.items():
            levels = np.asarray(levels, dtype=np.int64)
            if levels.size == 0:
                raise ValueError(f"group {name!r} has no occupied levels")
            n = levels.size
            if n == 1:
                codes = np.zeros(1, dtype=np.uint8)
            else:
                codes = round_half_up(255.0 * np.arange(n) / (n - 1)).astype(np.uint8)
            self.groups[name] = LilGroup(name, levels, codes)

    def apply(self, item) -> np.ndarray:
        """Convert one image to 8-bit codes, same shape as the input.

        Raises ScopeError when the image contains a level that was not in
        the set the mapping was built from.
        """
        if isinstance(item, RawImage):
            out = np.empty(item.samples.shape, dtype=np.uint8)
            if self.mode == "per_channel":
                for ch in CHANNELS:
                    dy, dx = item.pattern.channel_offsets()[ch]
                    out[dy::2, dx::2] = self._map(ch, item.channel_view(ch))
            else:
                out[:] = self._map(JOINT_GROUP, item.samples)
            return out
        arr = np.asarray(item)
        if arr.ndim == 3 and arr.shape[2] == 3 and self.mode == "per_channel":
            out = np.empty(arr.shape, dtype=np.uint8)
            for c, name in enumerate(RGB_GROUPS):
                out[:, :, c] = self._map(name, arr[:, :, c])
            return out
        group = JOINT_GROUP
        return self._map(group, arr)

    def _map(self, group: str, values: np.ndarray) -> np.ndarray:
        if group not in self.groups:
            raise ScopeError(f"no mapping for group {group!r} in this conversion")
        table = self.groups[group].table()
        values = np.asarray(values)
        high = values.max(initial=0)
        if high >= table.size:
            raise ScopeError(
                f"level {int(high)} in group {group!r} is outside the conversion scope"
            )
        coded = table[values]
        if (coded < 0).any():
            bad = int(values[coded < 0].min())
            raise ScopeError(
                f"level {bad} in group {group!r} is outside the conversion scope"
            )
        return coded.astype(np.uint8)

    def report(self) -> dict[str, dict]:
        """Occupancy summary per group, for logs and sidecars."""
        out = {}
        for name, grp in sorted(self.groups.items()):
            out[name] = {
                "occupied": int(grp.levels.size),
                "lowest": int(grp.levels[0]),
                "highest": int(grp.levels[-1]),
                "collisions": max(0, int(grp.levels.size) - 256),
            }
        return out


def build_lut(items, mode: str = "per_channel") -> LilLut:
    """Collect occupied levels over the given images and build the mapping."""
    return LilLut(collect_levels(items, mode), mode)


def lil_convert(
    items,
    mode: str = "per_channel",
    scope: str = "single",
) -> tuple[list[np.ndarray], list[LilLut]]:
    """Convert one or more images to 8 bits.

    scope="single" builds an independent mapping per image;
    scope="series" pools occupied levels over all images so the whole
    series shares one mapping (consistent brightness across frames).
    Returns the converted images and the mapping(s) used.
    """
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")
    items = list(items)
    if not items:
        raise ValueError("no images to convert")
    if scope == "series":
        lut = build_lut(items, mode)
        return [lut.apply(item) for item in items], [lut]
    outputs = []
    luts = []
    for item in items:
        lut = build_lut([item], mode)
        outputs.append(lut.apply(item))
        luts.append(lut)
    return outputs, luts
