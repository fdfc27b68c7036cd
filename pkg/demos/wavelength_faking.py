"""Faking a 450 nm single-photon reading with 780 nm and 1550 nm photons.

Run: python demos/wavelength_faking.py
"""

from tesfake import calibrate_thresholds, load_profile, plan_wavelength_fake, verify_wavelength_fake
from tesfake.readout import histogram

detector = load_profile()
seed = 2

peaks = {}
for k, lam in enumerate((450e-9, 780e-9, 1550e-9)):
    mean = 1.0 / detector.coupling_at(lam)  # about one absorbed photon per pulse
    n, v = detector.weak_coherent_run(mean, lam, 10_000, seed + k)
    th = calibrate_thresholds(v, 3)
    peaks[lam] = th
    print(f"{lam * 1e9:.0f} nm peaks (mV):", ", ".join(f"{1e3 * m:.1f}" for m in th.means))
    if lam == 1550e-9:
        coarse = [(c, n) for c, n in histogram(v, 0.005) if n > 20]
        print("  coarse histogram:", " ".join(f"{1e3 * c:.0f}mV:{n}" for c, n in coarse))

target = peaks[450e-9]
for lam in (780e-9, 1550e-9):
    plan = plan_wavelength_fake(1, 450e-9, lam)
    frac = verify_wavelength_fake(detector, plan, target, 5000, 7)
    print(f"{plan.fake_n} x {lam * 1e9:.0f} nm for 1 x 450 nm: energy off by {100 * plan.energy_mismatch:.1f}%, "
          f"read as one 450 nm photon in {100 * frac:.1f}% of trials")
