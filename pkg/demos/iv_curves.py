"""I-V curves of the paper-like TES, and why bright CW light looks like a warmer bath.

Run: python demos/iv_curves.py
"""

import numpy as np

from tesfake import load_profile
from tesfake.tes import bias_sweep, iv_curve, match_cw_to_bath

detector = load_profile()
p = detector.params
sweep = bias_sweep(1.5e-3, 0.0, 61)

print("Dark I-V curves at several bath temperatures")
for tb in (0.100, 0.140, 0.160, 0.200):
    curve = iv_curve(p, sweep, t_bath=tb)
    v, i = curve[::10, 0], curve[::10, 1]
    print(f"  T_bath = {tb * 1e3:.0f} mK:", " ".join(f"({x * 1e6:.2f} uV, {y * 1e6:.1f} uA)" for x, y in zip(v, i)))

# Above T_c the device is just a 3 ohm resistor.
hot = iv_curve(p, sweep[:-1], t_bath=0.200)
print(f"  R at 200 mK: {np.mean(hot[:, 0] / hot[:, 1]):.4f} ohm")

print("\nCW light at the fiber versus the equivalent bath temperature")
for cw in (0.0, 0.1e-9, 0.25e-9, 0.5e-9):
    tb, residual = match_cw_to_bath(p, detector.absorbed_cw(cw), sweep)
    print(f"  {cw * 1e9:5.2f} nW  ->  T_bath' = {tb * 1e3:6.2f} mK   (rms current residual {residual:.1e} A)")
