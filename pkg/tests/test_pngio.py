"""16-bit and 8-bit PNG I/O: exact round trips and input sniffing."""

import numpy as np
import pytest

from photoncal.pngio import (
    png16_roundtrip_bytes,
    read_image_any,
    read_png16,
    write_png16,
    write_png8,
    write_rgb16,
)


def test_png16_round_trip_random(tmp_path):
    rng = np.random.default_rng(11)
    for i in range(10):
        values = rng.integers(0, 65536, size=(int(rng.integers(1, 60)),
                                              int(rng.integers(1, 60))),
                              dtype=np.uint16)
        path = tmp_path / f"rt{i}.png"
        write_png16(values, path)
        assert np.array_equal(read_png16(path), values)


def test_png16_preserves_14bit_codes(tmp_path):
    # the correction pipeline stores 14-bpc codes in the 16-bit container
    codes = np.arange(16384, dtype=np.uint16).reshape(128, 128)
    path = tmp_path / "codes.png"
    write_png16(codes, path)
    assert np.array_equal(read_png16(path), codes)


def test_png16_roundtrip_bytes_helper():
    values = np.array([[0, 1], [16383, 65535]], dtype=np.uint16)
    assert np.array_equal(png16_roundtrip_bytes(values), values)


def test_png16_rejects_overflow(tmp_path):
    with pytest.raises(ValueError, match="overflow"):
        write_png16(np.array([[70000]], dtype=np.int64), tmp_path / "x.png")
    with pytest.raises(ValueError):
        write_png16(np.array([[-1]], dtype=np.int64), tmp_path / "x.png")


def test_png16_rejects_bad_shape(tmp_path):
    with pytest.raises(ValueError):
        write_png16(np.zeros((2, 2, 3), dtype=np.uint16), tmp_path / "x.png")


def test_png8_gray_and_rgb(tmp_path):
    rng = np.random.default_rng(12)
    gray = rng.integers(0, 256, size=(9, 13), dtype=np.uint8)
    write_png8(gray, tmp_path / "g.png")
    assert np.array_equal(read_image_any(tmp_path / "g.png"), gray)
    rgb = rng.integers(0, 256, size=(9, 13, 3), dtype=np.uint8)
    write_png8(rgb, tmp_path / "c.png")
    assert np.array_equal(read_image_any(tmp_path / "c.png"), rgb)


def test_read_image_any_16bit_gray(tmp_path):
    rng = np.random.default_rng(13)
    values = rng.integers(0, 65536, size=(7, 7), dtype=np.uint16)
    write_png16(values, tmp_path / "deep.png")
    back = read_image_any(tmp_path / "deep.png")
    assert back.dtype == np.uint16
    assert np.array_equal(back, values)


def test_read_image_any_16bit_rgb(tmp_path):
    # PIL silently truncates 16-bit RGB PNGs to 8 bits; the reader must not
    rng = np.random.default_rng(14)
    values = rng.integers(0, 65536, size=(6, 8, 3), dtype=np.uint16)
    write_rgb16(values, tmp_path / "rgb16.png")
    back = read_image_any(tmp_path / "rgb16.png")
    assert back.dtype == np.uint16 and back.shape == (6, 8, 3)
    assert np.array_equal(back, values)


def test_atomic_write_leaves_no_temp(tmp_path):
    write_png16(np.zeros((4, 4), dtype=np.uint16), tmp_path / "a.png")
    write_png8(np.zeros((4, 4), dtype=np.uint8), tmp_path / "b.png")
    leftovers = [p for p in tmp_path.iterdir() if p.suffix != ".png"]
    assert leftovers == []
