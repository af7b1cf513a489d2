"""Photon correction: scalar/vector agreement, clamps, quantization."""

import numpy as np
import pytest

from photoncal.bayer import BayerPattern, channel_index_map
from photoncal.calibration import build_calibration
from photoncal.correction import (
    QUANT_MAX,
    PhotonImage,
    correct_image,
    correct_pixel,
    dequantize14,
    quantize14,
)
from photoncal.raw import RawImage
from photoncal.spectra import N_LEVELS, PhotonTable


def simple_table(top=700.0):
    counts = np.zeros((4, N_LEVELS))
    for c in range(4):
        counts[c, 1:] = np.linspace(10.0, top - 10 * c, 7)
    return PhotonTable(counts)


def integer_knots(rng, h, w):
    start = rng.integers(20, 60, size=(h, w, 1))
    steps = rng.integers(1, 80, size=(h, w, N_LEVELS - 1))
    return np.concatenate([start, start + np.cumsum(steps, axis=2)], axis=2).astype(
        np.float64
    )


def make_map(rng, h=8, w=8, pattern=BayerPattern.RGGB):
    knots = integer_knots(rng, h, w)
    return build_calibration(
        [knots[:, :, k] for k in range(N_LEVELS)], simple_table(), pattern
    )


def reference_correct(image, cal):
    """Pixel loop over the scalar reference implementation."""
    h, w = cal.height, cal.width
    cidx = channel_index_map(cal.pattern, h, w)
    knots = cal.knot_intensities
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = correct_pixel(
                image.samples[y, x], knots[y, x], cal.photon_table.counts[cidx[y, x]]
            )
    return out


# ---------------------------------------------------------------------------
# correction values


def test_vector_path_matches_scalar_reference():
    rng = np.random.default_rng(60)
    for pattern in (BayerPattern.RGGB, BayerPattern.BGGR):
        cal = make_map(rng, h=10, w=12, pattern=pattern)
        # raw values spanning below-dark, the curve interior, and beyond L7
        samples = rng.integers(0, 700, size=(10, 12)).astype(np.uint16)
        image = RawImage(samples, 12, pattern)
        got = correct_image(image, cal)
        assert np.array_equal(got.values, reference_correct(image, cal))


def test_exact_at_every_knot():
    rng = np.random.default_rng(61)
    cal = make_map(rng, h=6, w=6)
    cidx = channel_index_map(cal.pattern, 6, 6)
    for k in range(N_LEVELS):
        samples = cal.knot_intensities[:, :, k].astype(np.uint16)
        got = correct_image(RawImage(samples, 12, cal.pattern), cal)
        expect = cal.photon_table.counts[cidx, k]
        assert np.array_equal(got.values, expect), f"knot L{k}"


def test_clamps_counted_and_applied():
    # identical curve everywhere so the interior value 200 never clamps
    knots = np.broadcast_to(np.linspace(50, 400, N_LEVELS), (4, 4, N_LEVELS))
    cal = build_calibration(
        [knots[:, :, k] for k in range(N_LEVELS)], simple_table(), BayerPattern.RGGB
    )
    samples = np.full((4, 4), 200, dtype=np.uint16)
    samples[0, 0] = 0      # below the dark knot
    samples[0, 1] = 4095   # beyond L7
    got = correct_image(RawImage(samples, 12, cal.pattern), cal)
    assert got.clamped_low == 1 and got.clamped_high == 1
    assert got.values[0, 0] == cal.photon_table.counts[0, 0] == 0.0
    cidx = channel_index_map(cal.pattern, 4, 4)
    assert got.values[0, 1] == cal.photon_table.counts[cidx[0, 1], -1]


def test_clamps_on_defective_pixels_not_counted():
    rng = np.random.default_rng(63)
    knots = integer_knots(rng, 4, 4)
    knots[0, 0, :] = 77.0  # defective, would otherwise clamp low at v=0
    cal = build_calibration(
        [knots[:, :, k] for k in range(N_LEVELS)], simple_table(), BayerPattern.RGGB
    )
    samples = np.full((4, 4), 200, dtype=np.uint16)
    samples[0, 0] = 0
    got = correct_image(RawImage(samples, 12, cal.pattern), cal)
    assert got.fallback_pixels == 1
    # the fallback curve starts above 0, so v=0 still clamps low there
    assert got.clamped_low == 1 and got.clamped_high == 0


def test_defective_pixel_uses_fallback_curve():
    rng = np.random.default_rng(64)
    knots = integer_knots(rng, 8, 8)
    knots[2, 2, :] = 5.0
    cal = build_calibration(
        [knots[:, :, k] for k in range(N_LEVELS)], simple_table(), BayerPattern.RGGB
    )
    samples = rng.integers(50, 500, size=(8, 8)).astype(np.uint16)
    image = RawImage(samples, 12, cal.pattern)
    got = correct_image(image, cal)
    rows, cols, fk = cal.fallback_curves()
    assert (rows[0], cols[0]) == (2, 2)
    cidx = channel_index_map(cal.pattern, 8, 8)
    expect = correct_pixel(
        samples[2, 2], fk[0], cal.photon_table.counts[cidx[2, 2]]
    )
    assert got.values[2, 2] == expect


def test_worker_count_does_not_change_bytes():
    rng = np.random.default_rng(65)
    cal = make_map(rng, h=600, w=16)  # three 256-row strips
    samples = rng.integers(0, 700, size=(600, 16)).astype(np.uint16)
    image = RawImage(samples, 12, cal.pattern)
    serial = correct_image(image, cal, workers=1)
    for workers in (2, 4):
        threaded = correct_image(image, cal, workers=workers)
        assert serial.values.tobytes() == threaded.values.tobytes()
        assert (threaded.clamped_low, threaded.clamped_high) == (
            serial.clamped_low,
            serial.clamped_high,
        )


def test_shape_and_pattern_mismatch():
    rng = np.random.default_rng(66)
    cal = make_map(rng, h=4, w=6)
    with pytest.raises(ValueError, match="map is 6x4"):
        correct_image(
            RawImage(np.zeros((4, 4), dtype=np.uint16), 12, cal.pattern), cal
        )
    with pytest.raises(ValueError, match="pattern"):
        correct_image(
            RawImage(np.zeros((4, 6), dtype=np.uint16), 12, BayerPattern.GRBG), cal
        )


def test_full_scale_defaults_to_table_maximum():
    rng = np.random.default_rng(67)
    cal = make_map(rng)
    image = RawImage(np.full((8, 8), 100, dtype=np.uint16), 12, cal.pattern)
    got = correct_image(image, cal)
    assert got.full_scale == cal.photon_table.full_scale_default() == 700.0
    custom = correct_image(image, cal, full_scale=512.0)
    assert custom.full_scale == 512.0


# ---------------------------------------------------------------------------
# PhotonImage and quantization


def test_photon_image_validation_and_sidecar():
    values = np.ones((2, 2))
    img = PhotonImage(values, BayerPattern.RGGB, 100.0, 1, 2, 3)
    assert not img.values.flags.writeable
    side = img.sidecar()
    assert side == {
        "full_scale": 100.0,
        "quant_bits": 14,
        "pattern": "RGGB",
        "clamped_low": 1,
        "clamped_high": 2,
        "fallback_pixels": 3,
    }
    with pytest.raises(ValueError, match="2-D"):
        PhotonImage(np.ones(4), BayerPattern.RGGB, 100.0)
    with pytest.raises(ValueError, match="positive"):
        PhotonImage(values.copy(), BayerPattern.RGGB, 0.0)


def test_quantize14_rounds_half_up():
    # full_scale = QUANT_MAX makes the code equal round_half_up(v)
    v = np.array([0.0, 0.4999, 0.5, 1.5, 2.5, 16382.5, 16383.0])
    codes = quantize14(v, float(QUANT_MAX))
    assert codes.dtype == np.uint16
    assert codes.tolist() == [0, 0, 1, 2, 3, 16383, 16383]


def test_quantize14_saturates_at_full_scale():
    codes = quantize14(np.array([120.0, 100.0, 99.99]), 100.0)
    assert codes[0] == codes[1] == QUANT_MAX
    assert codes[2] < QUANT_MAX


def test_quantization_round_trip_error_bounded():
    rng = np.random.default_rng(68)
    fs = 3600.0
    photons = rng.uniform(0.0, fs, size=4096)
    back = dequantize14(quantize14(photons, fs), fs)
    half_step = fs / QUANT_MAX / 2.0
    assert np.max(np.abs(back - photons)) <= half_step + 1e-12
    with pytest.raises(ValueError, match="positive"):
        quantize14(photons, 0.0)
    with pytest.raises(ValueError, match="positive"):
        dequantize14(np.zeros(3, dtype=np.uint16), -1.0)
