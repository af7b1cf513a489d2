"""From measured light spectra and QE curves to the photon table.

Run from the repository root:  python3 demos/02_spectra_to_photon_table.py
"""

import numpy as np

from photoncal import (
    Spectrum,
    demo_level_spectra,
    integrate_trapezoid,
    photon_counts,
)

# Trapezoid integration is the single numeric primitive here. It is exact
# for piecewise-linear data, e.g. this triangle has area 200.
triangle = Spectrum(np.array([400.0, 500.0, 600.0]), np.array([0.0, 2.0, 0.0]))
print("triangle area:", integrate_trapezoid(triangle))

# The demo acquisition: a two-lobe lamp behind seven gray filters, and a
# Gaussian QE curve per channel. Each photon count is the integral of
# (transmitted spectrum x QE) over wavelength, in relative units.
spectra, qe, table = demo_level_spectra(full_scale=3600.0)

print("\nlamp spectrum at L7, sampled every 50 nm:")
wl = spectra[-1].wavelengths
for i in range(0, wl.size, 25):
    print(f"  {wl[i]:5.0f} nm  {spectra[-1].values[i]:8.1f}")

print("\nphoton table (relative counts):")
print(table.format_text())

# The table is monotone per channel (more light, more photons) and the
# dark level L0 is zero photons by definition.
assert np.all(table.counts[:, 0] == 0.0)
assert np.all(np.diff(table.counts, axis=1) > 0)

# photon_counts() is the general entry point: any 7 spectra + any QE set.
rebuilt = photon_counts(spectra, qe)
assert np.array_equal(rebuilt.counts, table.counts)
print("\nrebuilt table matches bit for bit")
