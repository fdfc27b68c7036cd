"""Acceptance checks, one per criterion; each prints a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import math

import numpy as np
import pytest

from tesfake import tes
from tesfake.attacks import calibrate_blinding, faked_state_response, plan_wavelength_fake, superlinearity_index
from tesfake.config import load_profile
from tesfake.optics import PhotonPulse, build_waveform, photon_energy, pulse_energy
from tesfake.qkd import AttackScenario, ClickModel, Undefined, analytic_qber, run_bb84_attack
from tesfake.readout import calibrate_thresholds
from tesfake.tes import BiasPoint, bias_sweep, integrate, iv_curve, match_cw_to_bath, resistance, steady_state

RESULTS = {}
_FINGERPRINTS = {}


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def criterion_1():
    e19 = pulse_energy(19, 1550e-9)
    worst = 0.0
    for n in (1, 2, 3, 7, 19, 100):
        for lam in (405e-9, 450e-9, 780e-9, 1310e-9, 1550e-9):
            a, b = pulse_energy(n, n * lam), pulse_energy(1, lam)
            worst = max(worst, abs(a - b) / b)
    ok = abs(e19 / 2.4e-18 - 1) <= 0.02 and worst <= 1e-12
    return ok, f"E(19 @ 1550 nm) = {e19:.4g} J ({100 * (e19 / 2.4e-18 - 1):+.2f}% vs 2.4e-18), identity worst rel err {worst:.1e}"


def criterion_2():
    p780 = plan_wavelength_fake(1, 450e-9, 780e-9)
    p1550 = plan_wavelength_fake(1, 450e-9, 1550e-9)
    direct = (2 * photon_energy(780e-9) / photon_energy(450e-9) - 1,
              1 - 3 * photon_energy(1550e-9) / photon_energy(450e-9))
    ok = (p780.fake_n == 2 and p1550.fake_n == 3
          and math.isclose(p780.energy_mismatch, direct[0], rel_tol=1e-9)
          and math.isclose(p1550.energy_mismatch, direct[1], rel_tol=1e-9)
          and abs(p780.energy_mismatch - 0.154) < 1.5e-3 and abs(p1550.energy_mismatch - 0.128) < 1.5e-3)
    return ok, (f"450->780: n={p780.fake_n}, mismatch {100 * p780.energy_mismatch:.2f}%; "
                f"450->1550: n={p1550.fake_n}, mismatch {100 * p1550.energy_mismatch:.2f}% (direct ratio; quoted 12.8%)")


def criterion_3():
    d = load_profile()
    p = d.params
    hot = iv_curve(p, bias_sweep(2e-3, 1e-5, 40), t_bath=0.200)
    slope = np.polyfit(hot[:, 0], hot[:, 1], 1)[0]
    slope_err = abs(slope * p.r_normal - 1)
    sweep = bias_sweep(2e-3, 0.0, 401)
    curve = iv_curve(p, sweep)
    r = np.array([resistance(p, steady_state(p, b)) for b in sweep])
    trans = curve[(r > 0.01 * p.r_normal) & (r < 0.99 * p.r_normal)]
    k = len(trans)
    power = np.prod(trans[k // 4: k - k // 4], axis=1)
    plateau = float(np.max(np.abs(power / power.mean() - 1)))
    target = 0.140
    cw = p.kappa * (target**p.thermal_exponent - p.t_bath**p.thermal_exponent)
    tb, res = match_cw_to_bath(p, cw, bias_sweep(1.5e-3, 0.0, 41))
    ok = slope_err < 0.01 and plateau < 0.05 and abs(tb - target) < 2e-3
    fp = (slope, plateau, tb, res, curve.tobytes())
    return ok, (f"ohmic slope err {100 * slope_err:.3f}%, plateau max dev {100 * plateau:.2f}%, "
                f"matched T_bath {1e3 * tb:.3f} mK for 140 mK"), fp


def _blinding_study():
    d = load_profile()
    _, v = d.weak_coherent_run(1.0 / d.params.coupling_efficiency, 1550e-9, 10_000, 101)
    th = calibrate_thresholds(v, 3)
    cal = calibrate_blinding(d, np.arange(1, 51) * 0.01e-9, th, trials=10_000, rng_seed=102)
    fake = d.bright_pulse_vmax(2.4e-18, cal.cw_power, 10_000, 103).mean()
    return d, th, cal, fake


def criterion_4():
    d, th, cal, fake = _blinding_study()
    ratio = fake / cal.unblinded_response
    ok = cal.fraction_below_threshold >= 0.99 and abs(ratio - 1) <= 0.2
    fp = (th.boundaries, cal.cw_power, cal.fraction_below_threshold, cal.unblinded_response, fake)
    return ok, (f"blinded at {1e9 * cal.cw_power:.2f} nW ({100 * cal.fraction_below_threshold:.2f}% below "
                f"threshold), 2.4e-18 J fake mean V_max = {ratio:.3f} x unblinded single photon"), fp


def criterion_5():
    e = np.linspace(1e-18, 1e-17, 10)
    lin = superlinearity_index(e, e)
    quad = superlinearity_index(e, e**2)
    d = load_profile()
    _, th, cal, _ = _blinding_study()
    resp = faked_state_response(d, cal, np.linspace(1.2e-18, 9.6e-18, 8), 10_000, 104)
    idx = superlinearity_index(resp.energies, resp.mean_vmax, (1.2e-18, 9.6e-18))
    synthetic_ok = abs(lin - 1) < 0.01 and abs(quad - 2) < 0.01
    ok = synthetic_ok and idx > 1
    fp = (lin, quad, idx, resp.mean_vmax.tobytes())
    return ok, (f"synthetic linear {lin:.4f}, quadratic {quad:.4f}; paper-like profile index {idx:.3f} "
                f"(needs > 1; logistic transition gives a sublinear response)"), fp


def criterion_6():
    worst = 0.0
    fails = 0
    tallies = []
    grid = np.round(np.linspace(0, 1, 11), 10)
    for i, pf in enumerate(grid):
        for j, ph in enumerate(grid):
            model = ClickModel(float(pf), float(ph))
            try:
                q = analytic_qber(model)
            except Undefined:
                continue
            stats = run_bb84_attack(AttackScenario(trials=100_000, seed=1000 + 11 * i + j), model)
            tallies.append((stats.errors, stats.sifted_detections))
            sigma = math.sqrt(q * (1 - q) / stats.sifted_detections)
            z = abs(stats.qber - q) / sigma if sigma > 0 else (0.0 if stats.qber == q else math.inf)
            worst = max(worst, z)
            fails += z > 3
    return fails == 0, f"120 models at 1e5 trials, worst deviation {worst:.2f} sigma, {fails} beyond 3 sigma", tallies


def criterion_7():
    model = ClickModel(1.0, 0.1737)
    stats = run_bb84_attack(AttackScenario(trials=1_000_000, seed=7), model)
    lo, hi = stats.qber_ci()
    ok = abs(stats.qber - 0.074) <= 0.005 and stats.verdict != "aborted-by-qber"
    return ok, (f"QBER {100 * stats.qber:.3f}% (95% CI {100 * lo:.2f}-{100 * hi:.2f}%), closed form "
                f"{100 * analytic_qber(model):.3f}%, verdict {stats.verdict} (abort at 11%)"), stats


def criterion_9():
    d = load_profile()
    p = d.params
    s0 = steady_state(p, d.bias)
    peaks = []
    for dt in (4e-9, 2e-9):
        wf = build_waveform(None, [PhotonPulse(1550e-9, 1.0, 16e-9)], 0, 5e-6, 1.0, dt)
        _, cur = integrate(p, s0, d.bias, wf.absorbed_power_samples, dt)
        peaks.append(d.readout.gain * (s0.current - cur).max())
    change = abs(peaks[0] - peaks[1]) / peaks[1]
    dt = 4e-9
    wf = build_waveform(None, [PhotonPulse(1550e-9, 1.0, 16e-9)], 0, 60e-6, 1.0, dt)
    temps, cur = integrate(p, s0, d.bias, wf.absorbed_power_samples, dt)
    r = resistance(p, temps)
    dis = (tes.bath_power(p, temps) - tes.bath_power(p, s0.temperature)) - (cur**2 * r - s0.current**2 * resistance(p, s0))
    net = np.trapezoid(dis, dx=dt)
    closure = abs(net / photon_energy(1550e-9) - 1)
    ok = change < 0.005 and closure < 0.01
    return ok, f"halving dt changes V_max by {100 * change:.3f}%, energy bookkeeping closes to {100 * closure:.3f}%"


def _run(n, fn):
    out = fn()
    ok, detail = out[0], out[1]
    if len(out) > 2:
        _FINGERPRINTS.setdefault(n, out[2])
    return report(n, ok, detail)


@pytest.mark.parametrize("n,fn", [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4),
                                  (5, criterion_5), (6, criterion_6), (7, criterion_7)])
def test_criterion(n, fn):
    assert _run(n, fn)


def _same(a, b):
    return repr(a) == repr(b)


def test_criterion_8_determinism():
    fns = {3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6, 7: criterion_7}
    first = {n: _FINGERPRINTS[n] if n in _FINGERPRINTS else fn()[2] for n, fn in fns.items()}
    second = {n: fn()[2] for n, fn in fns.items()}
    diff = [n for n in fns if not _same(first[n], second[n])]
    assert report(8, not diff, "criteria 3-7 repeated with fixed seeds: "
                  + ("byte-identical" if not diff else f"differences in {diff}"))


def test_criterion_9_integrator():
    assert _run(9, criterion_9)


if __name__ == "__main__":
    for n, fn in [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5),
                  (6, criterion_6), (7, criterion_7), (9, criterion_9)]:
        _run(n, fn)
    test_criterion_8_determinism()
