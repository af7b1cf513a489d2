"""Radiometric calibration of Bayer-mosaic cameras to photon counts.

The pipeline has three stages, each usable on its own:

1. calibrate: gray-filter image stacks (L0 dark .. L7 unfiltered) plus
   measured light spectra and QE curves give every pixel an 8-knot
   intensity -> photon curve (calibration, spectra, pie for focus
   selection).
2. correct: raw 12-bpc mosaic frames become per-pixel photon counts,
   stored as 14-bpc values in 16-bit PNG (correction).
3. visualize: deep images reduce to 8 bpc by least-information-loss
   remapping of the occupied levels (lil).

The synth module provides a deterministic virtual sensor with known
ground truth for validating all of the above. The `photoncal` command
exposes each stage as a subcommand.
"""

from .bayer import CHANNELS, BayerPattern, channel_field, channel_index_map
from .calibration import (
    CalibrationMap,
    build_calibration,
    crop_calibration,
    expected_ncal_size,
    load_calibration,
    mean_level_image,
    save_calibration,
)
from .correction import (
    PhotonImage,
    correct_image,
    correct_pixel,
    dequantize14,
    quantize14,
)
from .errors import CalibrationError, FormatError, PhotonCalError, ScopeError
from .lil import LilLut, build_lut, collect_levels, lil_convert, occupancy
from .pie import (
    ChannelHistogram,
    FocusProfile,
    RenyiParams,
    histogram,
    pie,
    pie_from_histogram,
    pie_profile,
    pig,
    renyi_entropy,
    select_focus,
)
from .pngio import read_image_any, read_png16, write_png8, write_png16
from .raw import CropRect, RawImage, crop, crop_array, read_raw, write_raw
from .spectra import (
    LEVEL_NAMES,
    N_LEVELS,
    PhotonTable,
    QeSet,
    Spectrum,
    integrate_trapezoid,
    load_qe_table,
    load_spectrum,
    multiply,
    photon_counts,
    resample,
    sample_at,
    save_qe_table,
    save_spectrum,
)
from .synth import (
    GRAY_TRANSMITTANCES,
    SensorModel,
    demo_level_spectra,
    flat_scene,
    generate_dataset,
    ramp_scene,
    render_stack,
    vignetted_model,
)

__version__ = "1.0.0"

__all__ = [
    "BayerPattern",
    "CHANNELS",
    "CalibrationError",
    "CalibrationMap",
    "ChannelHistogram",
    "CropRect",
    "FocusProfile",
    "FormatError",
    "GRAY_TRANSMITTANCES",
    "LEVEL_NAMES",
    "LilLut",
    "N_LEVELS",
    "PhotonCalError",
    "PhotonImage",
    "PhotonTable",
    "QeSet",
    "RawImage",
    "RenyiParams",
    "ScopeError",
    "SensorModel",
    "Spectrum",
    "build_calibration",
    "build_lut",
    "channel_field",
    "channel_index_map",
    "collect_levels",
    "correct_image",
    "correct_pixel",
    "crop",
    "crop_array",
    "crop_calibration",
    "demo_level_spectra",
    "dequantize14",
    "expected_ncal_size",
    "flat_scene",
    "generate_dataset",
    "histogram",
    "integrate_trapezoid",
    "lil_convert",
    "load_calibration",
    "load_qe_table",
    "load_spectrum",
    "mean_level_image",
    "multiply",
    "occupancy",
    "photon_counts",
    "pie",
    "pie_from_histogram",
    "pie_profile",
    "pig",
    "quantize14",
    "ramp_scene",
    "read_image_any",
    "read_png16",
    "read_raw",
    "renyi_entropy",
    "resample",
    "sample_at",
    "render_stack",
    "save_calibration",
    "save_qe_table",
    "save_spectrum",
    "select_focus",
    "vignetted_model",
    "write_png16",
    "write_png8",
    "write_raw",
]
