"""Synthetic sensor: response oracle, dataset layout, closure error."""

import json

import numpy as np
import pytest

from photoncal.bayer import CHANNELS, channel_field, channel_index_map
from photoncal.calibration import build_calibration, mean_level_image
from photoncal.correction import correct_image
from photoncal.raw import read_raw
from photoncal.spectra import (
    N_LEVELS,
    load_qe_table,
    load_spectrum,
    photon_counts,
)
from photoncal.synth import (
    GRAY_TRANSMITTANCES,
    demo_level_spectra,
    flat_scene,
    generate_dataset,
    ramp_scene,
    render_stack,
    vignetted_model,
)


# ---------------------------------------------------------------------------
# sensor model


def test_render_matches_response_formula():
    model = vignetted_model(16, 12, seed=70, n_defects=5)
    rng = np.random.default_rng(71)
    photons = rng.uniform(0.0, 6000.0, size=(12, 16))
    got = model.render(photons).samples
    # independent restatement of y = clamp(round(g*p + o), 0, max)
    expect = np.floor(model.gain * photons + model.offset + 0.5)
    expect = np.clip(expect, 0, 4095).astype(np.uint16)
    expect[model.stuck_rows, model.stuck_cols] = model.stuck_values
    assert np.array_equal(got, expect)


def test_model_is_deterministic_in_seed():
    a = vignetted_model(8, 8, seed=7, n_defects=3)
    b = vignetted_model(8, 8, seed=7, n_defects=3)
    c = vignetted_model(8, 8, seed=8, n_defects=3)
    assert np.array_equal(a.gain, b.gain)
    assert np.array_equal(a.offset, b.offset)
    assert np.array_equal(a.stuck_rows, b.stuck_rows)
    assert not np.array_equal(a.gain, c.gain)


def test_vignette_shape():
    model = vignetted_model(31, 21, seed=0, gain_jitter=0.0)
    # gain peaks at the exact center and falls toward the corners
    assert model.gain[10, 15] == pytest.approx(1.0)
    for corner in ((0, 0), (0, 30), (20, 0), (20, 30)):
        assert model.gain[corner] == pytest.approx(0.7)
    assert np.all(model.gain >= 0.7 - 1e-12) and np.all(model.gain <= 1.0 + 1e-12)
    with pytest.raises(ValueError, match="gain_range"):
        vignetted_model(4, 4, gain_range=(0.0, 1.0))


def test_stuck_pixels_ignore_illumination():
    model = vignetted_model(10, 10, seed=72, n_defects=4)
    dark = model.render(0.0).samples
    bright = model.render(3000.0).samples
    r, c = model.stuck_rows, model.stuck_cols
    assert np.array_equal(dark[r, c], model.stuck_values)
    assert np.array_equal(bright[r, c], model.stuck_values)
    live = np.ones((10, 10), dtype=bool)
    live[r, c] = False
    assert np.all(bright[live] >= dark[live])


def test_render_channels_uses_channel_field():
    model = vignetted_model(6, 6, seed=73)
    per_channel = [100.0, 200.0, 300.0, 400.0]
    a = model.render_channels(per_channel).samples
    field = channel_field(model.pattern, 6, 6, per_channel)
    assert np.array_equal(a, model.render(field).samples)


# ---------------------------------------------------------------------------
# demo spectra and scenes


def test_demo_table_properties():
    spectra, qe, table = demo_level_spectra(full_scale=3600.0)
    assert len(spectra) == 7
    assert table.full_scale_default() == pytest.approx(3600.0, abs=1e-9)
    counts = table.counts
    assert np.all(counts[:, 0] == 0.0)
    assert np.all(np.diff(counts, axis=1) > 0)
    # neutral filters: counts scale linearly with transmittance
    for c in range(4):
        ratio = counts[c, 1:] / counts[c, -1]
        assert np.allclose(ratio, GRAY_TRANSMITTANCES, rtol=1e-12)


def test_render_stack_levels():
    model = vignetted_model(8, 8, seed=74)
    _, _, table = demo_level_spectra()
    stack = render_stack(model, table)
    assert len(stack) == N_LEVELS
    dark = np.floor(model.offset + 0.5).astype(np.uint16)
    assert np.array_equal(stack[0].samples, dark)
    # exposure is monotone level over level
    for k in range(N_LEVELS - 1):
        assert np.all(stack[k + 1].samples >= stack[k].samples)


def test_scene_builders():
    model = vignetted_model(8, 6, seed=75)
    _, _, table = demo_level_spectra()
    flat = flat_scene(model, table, 0.6)
    cidx = channel_index_map(model.pattern, 6, 8)
    assert np.array_equal(flat, 0.6 * table.counts[cidx, -1])
    ramp = ramp_scene(model, table, lo=0.1, hi=0.9)
    frac = ramp / table.counts[cidx, -1]
    assert np.allclose(frac[:, 0], 0.1) and np.allclose(frac[:, -1], 0.9)
    assert np.all(np.diff(frac, axis=1) > 0)
    with pytest.raises(ValueError, match="fraction"):
        flat_scene(model, table, 1.5)


# ---------------------------------------------------------------------------
# dataset on disk


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthset")
    truth = generate_dataset(root, width=64, height=48, seed=76, n_defects=6)
    return root, truth


def test_dataset_inventory(dataset):
    root, truth = dataset
    for k in range(N_LEVELS):
        assert (root / "levels" / f"L{k}.nraw").is_file()
    for k in range(1, N_LEVELS):
        assert (root / "spectra" / f"L{k}.txt").is_file()
    assert (root / "spectra" / "qe.txt").is_file()
    for name in ("flat.nraw", "ramp.nraw", "flat_photons.npy", "ramp_photons.npy"):
        assert (root / "scenes" / name).is_file()
    assert truth == json.loads((root / "truth.json").read_text())
    assert truth["width"] == 64 and truth["height"] == 48
    assert len(truth["stuck_pixels"]) == 6
    assert truth["levels"] == [f"L{k}" for k in range(N_LEVELS)]


def test_table_recomputed_from_text_is_bit_identical(dataset):
    root, truth = dataset
    spectra = [
        load_spectrum(root / "spectra" / f"L{k}.txt") for k in range(1, N_LEVELS)
    ]
    qe = load_qe_table(root / "spectra" / "qe.txt")
    table = photon_counts(spectra, qe)
    for c, ch in enumerate(CHANNELS):
        assert table.counts[c].tolist() == truth["photon_table"][ch]


def test_end_to_end_closure_error_bounded(dataset):
    # calibrate from the stack, correct the flat scene, compare to truth;
    # quantization (one rounding in the render, one in the NCAL knots)
    # cannot move a value by more than one count, i.e. 1/gain photons
    root, truth = dataset
    levels = [
        read_raw(root / "levels" / f"L{k}.nraw") for k in range(N_LEVELS)
    ]
    means = [mean_level_image([f], 0) for f in levels]
    counts = np.array([truth["photon_table"][ch] for ch in CHANNELS])
    from photoncal.spectra import PhotonTable

    cal = build_calibration(means, PhotonTable(counts), levels[0].pattern)
    stuck = {(r, c) for r, c, _ in truth["stuck_pixels"]}
    for r, c in stuck:
        assert cal.defect_mask[r, c], "stuck pixels must be flagged defective"
    scene = read_raw(root / "scenes" / "flat.nraw")
    photons_true = np.load(root / "scenes" / "flat_photons.npy")
    got = correct_image(scene, cal)
    model = vignetted_model(64, 48, seed=76, n_defects=6)
    budget = 1.0 / model.gain
    err = np.abs(got.values - photons_true)
    live = np.ones((48, 64), dtype=bool)
    for r, c in stuck:
        live[r, c] = False
    assert np.all(err[live] <= budget[live] + 1e-9)
