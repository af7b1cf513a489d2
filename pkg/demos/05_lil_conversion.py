"""Least-information-loss conversion of deep images to 8 bits.

Run from the repository root:  python3 demos/05_lil_conversion.py
Outputs land in demo_output/05_lil_conversion/.

Plain rescaling of a 14-bpc image to 8 bpc merges levels wholesale; LIL
first discards the levels that never occur, then spreads the occupied
ones evenly over 0..255, so images with at most 256 distinct values lose
nothing at all.
"""

from pathlib import Path

import numpy as np

from photoncal import (
    build_lut,
    correct_image,
    demo_level_spectra,
    lil_convert,
    mean_level_image,
    quantize14,
    ramp_scene,
    render_stack,
    build_calibration,
    vignetted_model,
    write_png8,
)

out = Path("demo_output/05_lil_conversion")
out.mkdir(parents=True, exist_ok=True)

# The worked example: four occupied levels map to 0, 85, 170, 255.
tiny = np.array([[0, 5], [7, 4095]], dtype=np.uint16)
coded, (lut,) = lil_convert([tiny], mode="joint")
print("levels", lut.groups["all"].levels.tolist(),
      "->", lut.groups["all"].codes.tolist())

# A realistic deep image: correct a ramp scene, quantize to 14 bpc.
model = vignetted_model(256, 256, seed=5)
_, _, table = demo_level_spectra()
stack = render_stack(model, table)
cal = build_calibration([mean_level_image([f], 0) for f in stack],
                        table, model.pattern)
frames = []
for lo, hi in ((0.1, 0.5), (0.3, 0.9)):
    raw = model.render(ramp_scene(model, table, lo, hi))
    photons = correct_image(raw, cal)
    codes = quantize14(photons.values, photons.full_scale)
    from photoncal import RawImage

    frames.append(RawImage(codes, 14, model.pattern))

# Series scope: one shared mapping, so a level present in both frames
# gets the same 8-bit code in both (consistent brightness in a stack).
outputs, (series_lut,) = lil_convert(frames, mode="per_channel", scope="series")
for name, row in series_lut.report().items():
    print(f"{name:>3}: {row['occupied']} occupied levels in "
          f"[{row['lowest']}, {row['highest']}], {row['collisions']} collisions")
for i, arr in enumerate(outputs):
    write_png8(arr, out / f"ramp{i}_series.png")

# Single scope treats each frame on its own; joint mode pools channels.
single, _ = lil_convert(frames, mode="joint", scope="single")
for i, arr in enumerate(single):
    write_png8(arr, out / f"ramp{i}_single.png")
print("wrote", len(outputs) + len(single), "PNGs to", out)

# build_lut() exposes the mapping itself, e.g. to convert later frames
# against a frozen scope (unseen levels raise ScopeError).
lut = build_lut(frames[:1], mode="per_channel")
print("frame-0 R channel occupies", lut.groups["R"].levels.size, "levels")

# The CLI equivalents:
#   photoncal lil corrected/*.png --bayer RGGB --bit-depth 14 \
#       --scope series --out lil8/
#   photoncal lil scene.nraw --planes --out lil8/
