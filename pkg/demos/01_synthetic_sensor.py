"""A deterministic synthetic camera: vignette, per-pixel offsets, stuck pixels.

Run from the repository root:  python3 demos/01_synthetic_sensor.py
Outputs land in demo_output/01_synthetic_sensor/.
"""

from pathlib import Path

from photoncal import (
    BayerPattern,
    demo_level_spectra,
    generate_dataset,
    render_stack,
    vignetted_model,
)

out = Path("demo_output/01_synthetic_sensor")
out.mkdir(parents=True, exist_ok=True)

# The model is noise-free on purpose: y = clamp(round(gain*photons + offset)).
# Whatever error survives calibration is the pipeline's own error.
model = vignetted_model(256, 256, pattern=BayerPattern.RGGB, seed=1, n_defects=8)

print("gain range   :", model.gain.min().round(3), "..", model.gain.max().round(3))
print("offset range :", model.offset.min().round(1), "..", model.offset.max().round(1))
print("stuck pixels :", list(zip(model.stuck_rows, model.stuck_cols)))

# A dark exposure shows the offsets; a bright one shows the vignette.
_, _, table = demo_level_spectra()
dark = model.render(0.0)
bright = model.render_channels(table.counts[:, -1])
print("dark frame   :", dark.samples.min(), "..", dark.samples.max(), "counts")
print("bright frame :", bright.samples.min(), "..", bright.samples.max(), "counts")

# Stuck pixels hold their value no matter the light level.
r, c = model.stuck_rows[0], model.stuck_cols[0]
print(f"pixel ({r},{c}) dark={dark.samples[r, c]} bright={bright.samples[r, c]}")

# The calibration stack is eight exposures, dark L0 to unfiltered L7.
stack = render_stack(model, table)
for k, frame in enumerate(stack):
    print(f"L{k}: mean {frame.samples.mean():8.1f} counts")

# generate_dataset writes the whole acquisition (stack, spectra, scenes,
# ground truth) to disk; the CLI equivalent is `photoncal synth --out DIR`.
truth = generate_dataset(out / "dataset", width=128, height=128, seed=1, n_defects=8)
print("dataset written to", out / "dataset")
print("truth keys:", sorted(truth))
