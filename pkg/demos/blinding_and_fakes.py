"""Blind the TES with CW light, then make it 'see' a photon with a bright pulse.

Run: python demos/blinding_and_fakes.py
"""

import numpy as np

from tesfake import calibrate_blinding, calibrate_thresholds, faked_state_response, load_profile
from tesfake.attacks import superlinearity_index

detector = load_profile()
p = detector.params

_, v = detector.weak_coherent_run(1.0 / p.coupling_efficiency, 1550e-9, 10_000, 1)
th = calibrate_thresholds(v, 3)
print(f"single-photon threshold: {1e3 * th.single_photon_threshold:.2f} mV")

grid = np.arange(1, 51) * 0.01e-9
cal = calibrate_blinding(detector, grid, th, trials=5000, rng_seed=2)
r = cal.blinded_resistance(p)
print(f"blinding power: {1e9 * cal.cw_power:.2f} nW at the fiber, R = {r / p.r_normal:.2f} R_n")
print(f"single photon V_max: {1e3 * cal.unblinded_response:.1f} mV unblinded, "
      f"{1e3 * cal.single_photon_response:.1f} mV blinded")

resp = faked_state_response(detector, cal, np.linspace(1.2e-18, 9.6e-18, 8), 5000, 3)
for e, m, s in resp.rows():
    print(f"  fake {e:.2e} J  ->  V_max {1e3 * m:6.1f} +- {1e3 * s:.1f} mV")
print(f"fake energy that mimics one photon: {resp.matching_energy:.2e} J")
print(f"max log-log slope of the response: {superlinearity_index(resp.energies, resp.mean_vmax):.3f}")
