"""Bayer pattern addressing: layouts, parity shifts, channel maps."""

import numpy as np
import pytest

from photoncal.bayer import (
    CHANNELS,
    BayerPattern,
    channel_field,
    channel_index_map,
)

# Independent statement of the four layouts: channel at quadrant
# (y % 2, x % 2), written out rather than derived from the code under test.
LAYOUT_ORACLE = {
    "RGGB": {(0, 0): "R", (0, 1): "G1", (1, 0): "G2", (1, 1): "B"},
    "GRBG": {(0, 0): "G1", (0, 1): "R", (1, 0): "B", (1, 1): "G2"},
    "GBRG": {(0, 0): "G2", (0, 1): "B", (1, 0): "R", (1, 1): "G1"},
    "BGGR": {(0, 0): "B", (0, 1): "G2", (1, 0): "G1", (1, 1): "R"},
}


def test_channel_names_order():
    assert CHANNELS == ("R", "G1", "G2", "B")


def test_pattern_codes():
    assert [p.value for p in BayerPattern] == [0, 1, 2, 3]
    assert [p.name for p in BayerPattern] == ["RGGB", "GRBG", "GBRG", "BGGR"]


@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_channel_of_matches_oracle(pattern):
    oracle = LAYOUT_ORACLE[pattern.name]
    for y in range(6):
        for x in range(6):
            assert pattern.channel_of(x, y) == oracle[(y % 2, x % 2)]


@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_channel_offsets_consistent(pattern):
    offsets = pattern.channel_offsets()
    assert sorted(offsets) == sorted(CHANNELS)
    for ch, (dy, dx) in offsets.items():
        assert pattern.channel_of(dx, dy) == ch


@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_shift_matches_cropped_oracle(pattern):
    # cropping at offset (dx, dy) relabels sites: new (0,0) is old (dx, dy)
    for dy in range(2):
        for dx in range(2):
            shifted = pattern.shifted(dx, dy)
            for y in range(4):
                for x in range(4):
                    assert shifted.channel_of(x, y) == pattern.channel_of(x + dx, y + dy)


def test_shift_identities():
    assert BayerPattern.RGGB.shifted(1, 0) is BayerPattern.GRBG
    assert BayerPattern.RGGB.shifted(0, 1) is BayerPattern.GBRG
    assert BayerPattern.RGGB.shifted(1, 1) is BayerPattern.BGGR
    for p in BayerPattern:
        assert p.shifted(0, 0) is p
        assert p.shifted(1, 0).shifted(1, 0) is p
        assert p.shifted(1, 1).shifted(1, 1) is p


def test_from_code_and_name():
    for p in BayerPattern:
        assert BayerPattern.from_code(p.value) is p
        assert BayerPattern.from_name(p.name) is p
        assert BayerPattern.from_name(p.name.lower()) is p
    with pytest.raises(ValueError):
        BayerPattern.from_code(4)
    with pytest.raises(ValueError):
        BayerPattern.from_name("RGBG")


@pytest.mark.parametrize("pattern", list(BayerPattern))
def test_channel_index_map(pattern):
    cidx = channel_index_map(pattern, 5, 7)
    assert cidx.shape == (5, 7) and cidx.dtype == np.uint8
    for y in range(5):
        for x in range(7):
            assert CHANNELS[cidx[y, x]] == pattern.channel_of(x, y)


def test_channel_field_expansion():
    values = np.array([1.0, 2.0, 3.0, 4.0])
    field = channel_field(BayerPattern.RGGB, 4, 4, values)
    assert field[0, 0] == 1.0 and field[0, 1] == 2.0
    assert field[1, 0] == 3.0 and field[1, 1] == 4.0
    assert field[2, 2] == 1.0
    with pytest.raises(ValueError):
        channel_field(BayerPattern.RGGB, 4, 4, np.ones(3))
