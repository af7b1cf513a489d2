"""Point information gain entropy (PIE) and in-focus frame selection.

PIE aggregates, over the occupied intensity levels of one Bayer channel's
histogram, the change in Renyi entropy caused by removing a single pixel
of that intensity. Along a z-scan it peaks where the image carries the
most structure, which is what picks the in-focus calibration frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayer import CHANNELS
from .raw import RawImage


@dataclass(frozen=True)
class RenyiParams:
    """Entropy order. alpha = 2 is the working value everywhere."""

    alpha: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0 or self.alpha == 1.0:
            raise ValueError(f"alpha must be positive and != 1, got {self.alpha}")


@dataclass(frozen=True)
class ChannelHistogram:
    """Occurrences per intensity level for one Bayer channel of one frame."""

    counts: np.ndarray  # int64, length 2**bit_depth
    total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1:
            raise ValueError("histogram counts must be 1-D")
        if int(c.sum()) != self.total:
            raise ValueError("histogram total does not match counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


def histogram(image: RawImage, channel: str) -> ChannelHistogram:
    """Intensity histogram of one Bayer channel, length 2**bit_depth."""
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    sub = image.channel_view(channel)
    counts = np.bincount(sub.ravel(), minlength=1 << image.bit_depth).astype(np.int64)
    return ChannelHistogram(counts, int(sub.size))


def renyi_entropy(h: ChannelHistogram, params: RenyiParams = RenyiParams()) -> float:
    """H_alpha = 1/(1-alpha) * log2 sum_j (n_j/N)^alpha, in bits.

    For alpha = 2 the sum is computed as p*p so that uniform histograms
    over a power-of-two number of levels come out exactly log2 k.
    """
    if h.total <= 0:
        raise ValueError("histogram is empty")
    occupied = h.counts[h.counts > 0].astype(np.float64)
    p = occupied / h.total
    a = params.alpha
    if a == 2.0:
        return -math.log2(float(np.sum(p * p)))
    return math.log2(float(np.sum(p**a))) / (1.0 - a)


def pig(h: ChannelHistogram, level: int, params: RenyiParams = RenyiParams()) -> float:
    """Point information gain of one intensity level, in bits.

    Gamma_alpha(level) = H_alpha(h) - H_alpha(h with one pixel of that
    intensity removed). No absolute value is taken; the sign carries
    information.
    """
    if h.total < 2:
        raise ValueError("need at least 2 pixels to remove one")
    if not 0 <= level < h.counts.size or h.counts[level] < 1:
        raise ValueError(f"intensity level {level} is unoccupied")
    reduced = h.counts.copy()
    reduced[level] -= 1
    return renyi_entropy(h, params) - renyi_entropy(
        ChannelHistogram(reduced, h.total - 1), params
    )


def pie_from_histogram(
    h: ChannelHistogram,
    params: RenyiParams = RenyiParams(),
    weighting: str = "distinct",
) -> float:
    """PIE of one channel histogram.

    weighting='distinct' removes one pixel per occupied level and sums
    the gains; 'occurrence' weights each level's gain by its pixel count.
    Computed in a single pass over occupied levels: the reduced-histogram
    power sum differs from the full one only in the term of the touched
    level, so for alpha = 2 the update T - 2n + 1 is exact integer
    arithmetic in doubles.
    """
    if weighting not in ("distinct", "occurrence"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if h.total < 2:
        raise ValueError("channel must have >= 2 pixels")
    n = h.counts[h.counts > 0].astype(np.float64)
    N = float(h.total)
    a = params.alpha
    if a == 2.0:
        T = float(np.sum(n * n))
        T_red = T - 2.0 * n + 1.0
        h_full = 2.0 * math.log2(N) - math.log2(T)
        h_red = 2.0 * math.log2(N - 1.0) - np.log2(T_red)
    else:
        T = float(np.sum(n**a))
        T_red = T - n**a + (n - 1.0) ** a
        h_full = (math.log2(T) - a * math.log2(N)) / (1.0 - a)
        h_red = (np.log2(T_red) - a * math.log2(N - 1.0)) / (1.0 - a)
    gamma = h_full - h_red
    if weighting == "distinct":
        return float(np.sum(gamma))
    return float(np.sum(n * gamma))


def pie(
    image: RawImage,
    channel: str,
    params: RenyiParams = RenyiParams(),
    weighting: str = "distinct",
) -> float:
    """PIE of one Bayer channel of one frame, in bits."""
    return pie_from_histogram(histogram(image, channel), params, weighting)


@dataclass(frozen=True)
class FocusProfile:
    """Per-frame, per-channel PIE values along a stack.

    values has shape (n_frames, 4) in CHANNELS order; z holds optional
    stage positions parallel to the frame axis.
    """

    values: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 4 or v.shape[0] == 0:
            raise ValueError(f"profile must have shape (n_frames, 4), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile contains non-finite PIE values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.z is not None:
            z = np.asarray(self.z, dtype=np.float64)
            if z.shape != (v.shape[0],):
                raise ValueError("z positions must match the number of frames")
            object.__setattr__(self, "z", z)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def channel_mean(self) -> np.ndarray:
        return self.values.mean(axis=1)


def pie_profile(
    frames,
    params: RenyiParams = RenyiParams(),
    weighting: str = "distinct",
    z=None,
) -> FocusProfile:
    """Compute the four-channel PIE of every frame in a stack."""
    rows = []
    for frame in frames:
        rows.append([pie(frame, ch, params, weighting) for ch in CHANNELS])
    return FocusProfile(np.asarray(rows, dtype=np.float64), z)


def select_focus(
    profile: FocusProfile, rule: str = "max", manual_index: int | None = None
) -> int:
    """Pick the in-focus frame index from a profile.

    rule='max' (default) or 'min' takes the extremum of the channel-mean
    PIE; exact ties are broken toward the stack center (the frame closest
    to the median index, lower index on a residual tie). rule='manual'
    returns manual_index after a range check.
    """
    if rule == "manual":
        if manual_index is None:
            raise ValueError("rule='manual' requires manual_index")
        if not 0 <= manual_index < profile.n_frames:
            raise ValueError(
                f"manual index {manual_index} out of range for {profile.n_frames} frames"
            )
        return int(manual_index)
    if rule not in ("max", "min"):
        raise ValueError(f"unknown selection rule {rule!r}")
    mean = profile.channel_mean()
    target = mean.max() if rule == "max" else mean.min()
    candidates = np.flatnonzero(mean == target)
    center = (profile.n_frames - 1) / 2.0
    return int(candidates[np.argmin(np.abs(candidates - center))])
