import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tesfake import tes
from tesfake.optics import PhotonPulse, build_waveform, photon_energy
from tesfake.tes import (BiasPoint, NoConvergence, StepTooLarge, TesParams, TesState, bias_sweep,
                         integrate, iv_curve, match_cw_to_bath, reconstruct_vtes, resistance,
                         steady_state, step)


@pytest.fixture(scope="module")
def params(detector):
    return detector.params


def test_resistance_midpoint_and_saturation(params):
    assert resistance(params, params.t_critical) == pytest.approx(1.5, rel=1e-15)
    r = resistance(params, params.t_critical + 10 * params.transition_width)
    assert abs(r - 3.0) / 3.0 < 1e-4


def test_resistance_deep_superconducting():
    p = TesParams(3.0, 0.0161, 0.18, 0.002, 0.1, 1e-15, 1e-8, 4.0, 1e-8)
    assert resistance(p, TesState(0.100, 0.0)) < 1e-15


@given(st.floats(0.01, 0.4), st.floats(0.01, 0.4))
def test_resistance_monotone_and_bounded(params, t1, t2):
    r1, r2 = resistance(params, t1), resistance(params, t2)
    assert 0 <= r1 <= params.r_normal
    if t1 < t2:
        assert r1 <= r2


def test_reconstruct_vtes(params):
    assert reconstruct_vtes(params, BiasPoint(100e-6), TesState(0.1, 100e-6)) == 0
    assert reconstruct_vtes(params, BiasPoint(100e-6), TesState(0.1, 0.0)) == pytest.approx(1.61e-6)
    assert reconstruct_vtes(params, BiasPoint(50e-6), TesState(0.1, 20e-6)) == pytest.approx(0.483e-6)


@pytest.mark.parametrize("bad", [dict(r_shunt=3.5), dict(kappa=-1.0), dict(heat_capacity=float("nan")),
                                 dict(coupling_efficiency=1.5), dict(transition_width=0.0)])
def test_params_validation(params, bad):
    with pytest.raises(ValueError):
        params.with_(**bad)


def test_state_and_bias_validation():
    with pytest.raises(ValueError):
        TesState(-0.1, 0.0)
    with pytest.raises(ValueError):
        TesState(0.1, float("inf"))
    with pytest.raises(ValueError):
        BiasPoint(-1e-6)


def test_steady_state_zero_bias(params):
    s = steady_state(params, BiasPoint(0.0))
    assert s.temperature == params.t_bath
    assert s.current == 0


def test_steady_state_ohmic_limit(params):
    bias = BiasPoint(200e-6)
    s = steady_state(params, bias, optical_power=1e-9)
    assert s.temperature > params.t_critical + 10 * params.transition_width
    v = reconstruct_vtes(params, bias, s)
    assert s.current == pytest.approx(v / params.r_normal, rel=1e-4)


def test_steady_state_power_balance_mid_transition(detector):
    p = detector.params
    s = steady_state(p, detector.bias)
    r = resistance(p, s)
    assert 0.1 * p.r_normal < r < 0.9 * p.r_normal
    residual = s.current**2 * r - tes.bath_power(p, s.temperature)
    assert abs(residual) < 1e-18


def test_steady_state_negative_power_rejected(params):
    with pytest.raises(ValueError):
        steady_state(params, BiasPoint(1e-4), optical_power=-1e-12)


def test_steady_state_no_convergence(params):
    with pytest.raises(NoConvergence):
        steady_state(params, BiasPoint(5e-4), max_iter=2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2e-3), st.floats(0, 1e-10))
def test_regime_dichotomy(params, ib, power):
    s = steady_state(params, BiasPoint(ib), power)
    r = resistance(params, s)
    in_transition = abs(s.temperature - params.t_critical) < 10 * params.transition_width
    assert r < 0.01 * params.r_normal or r > 0.99 * params.r_normal or in_transition


def test_step_keeps_fixed_point(detector):
    p = detector.params
    s0 = steady_state(p, detector.bias)
    s1 = step(p, s0, detector.bias, 0.0, 4e-9)
    assert s1.temperature == pytest.approx(s0.temperature, rel=1e-9)
    assert s1.current == pytest.approx(s0.current, rel=1e-9)


def test_step_cap(params):
    s = TesState(0.1, 0.0)
    with pytest.raises(StepTooLarge):
        step(params, s, BiasPoint(0.0), 0.0, 2 * params.max_step)
    with pytest.raises(StepTooLarge):
        step(params, s, BiasPoint(0.0), 0.0, 0.0)


def test_impulse_without_feedback(params):
    # no bias, no Joule feedback: a photon deposited in one short step heats by E/C
    e = photon_energy(1550e-9)
    dt = 1e-9
    temps, _ = integrate(params, TesState(params.t_bath, 0.0), BiasPoint(0.0), [e / dt], dt)
    assert temps[-1] - params.t_bath == pytest.approx(e / params.heat_capacity, rel=1e-3)


def _single_photon_peak(detector, dt, duration=5e-6):
    p = detector.params
    s0 = steady_state(p, detector.bias)
    wf = build_waveform(None, [PhotonPulse(1550e-9, 1.0, 16e-9)], 0, duration, 1.0, dt)
    temps, currents = integrate(p, s0, detector.bias, wf.absorbed_power_samples, dt)
    return s0, temps, currents


def test_halving_dt_converges(detector):
    _, _, c1 = _single_photon_peak(detector, 4e-9)
    s0, _, c2 = _single_photon_peak(detector, 2e-9)
    peak1 = (s0.current - c1).max()
    peak2 = (s0.current - c2).max()
    assert abs(peak1 - peak2) / peak2 < 0.005


def test_energy_bookkeeping(detector):
    p = detector.params
    dt = 4e-9
    s0, temps, currents = _single_photon_peak(detector, dt, duration=60e-6)
    r = resistance(p, temps)
    joule = currents**2 * r
    bath = tes.bath_power(p, temps)
    # back at the operating point?
    assert abs(temps[-1] - s0.temperature) < 1e-3 * abs(temps.max() - s0.temperature)
    j0 = s0.current**2 * resistance(p, s0)
    b0 = tes.bath_power(p, s0.temperature)
    net = np.trapezoid((bath - b0) - (joule - j0), dx=dt)
    assert net == pytest.approx(photon_energy(1550e-9), rel=0.01)


def test_integrate_shapes_and_determinism(detector):
    p = detector.params
    s0 = steady_state(p, detector.bias)
    power = np.zeros((50, 3))
    power[:4] = [0.0, 1e-11, 2e-11]
    a = integrate(p, s0, detector.bias, power, 4e-9)
    b = integrate(p, s0, detector.bias, power, 4e-9)
    assert a[0].shape == (51, 3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.all(a[1][-1, 0] == s0.current)


def test_iv_curve_ohmic_above_tc(params):
    curve = iv_curve(params, bias_sweep(2e-3, 1e-5, 40), t_bath=0.200)
    v, i = curve[:, 0], curve[:, 1]
    assert np.allclose(i, v / params.r_normal, rtol=0.01)
    slope, icpt = np.polyfit(v, i, 1)
    r2 = 1 - np.sum((i - slope * v - icpt) ** 2) / np.sum((i - i.mean()) ** 2)
    assert r2 > 0.9999
    assert abs(slope * params.r_normal - 1) < 0.01


def _transition_points(params, sweep):
    curve = iv_curve(params, sweep)
    states = [steady_state(params, b) for b in sweep]
    r = np.array([resistance(params, s) for s in states])
    mask = (r > 0.01 * params.r_normal) & (r < 0.99 * params.r_normal)
    return curve[mask]


def test_iv_constant_power_plateau(params):
    sweep = bias_sweep(2e-3, 0.0, 401)
    trans = _transition_points(params, sweep)
    assert len(trans) > 20
    n = len(trans)
    mid = trans[n // 4: n - n // 4]
    power = mid[:, 0] * mid[:, 1]
    assert np.max(np.abs(power / power.mean() - 1)) < 0.05


def test_iv_curve_single_zero_point(params):
    assert np.array_equal(iv_curve(params, [BiasPoint(0.0)]), np.zeros((1, 2)))


def test_iv_curve_validation(params):
    with pytest.raises(ValueError):
        iv_curve(params, [])
    with pytest.raises(ValueError):
        iv_curve(params, [BiasPoint(1e-4), BiasPoint(3e-4), BiasPoint(2e-4)])


def test_iv_curve_reports_bias_index(params, monkeypatch):
    def boom(*a, **k):
        raise NoConvergence("stuck")
    monkeypatch.setattr(tes, "steady_state", boom)
    with pytest.raises(NoConvergence, match="bias point 0"):
        iv_curve(params, bias_sweep(1e-4, 2e-4, 3))


SWEEP = bias_sweep(1.5e-3, 0.0, 41)


def test_match_cw_zero_power(params):
    tb, res = match_cw_to_bath(params, 0.0, SWEEP)
    assert tb == pytest.approx(params.t_bath, abs=1e-5)
    assert res < 1e-12


def test_match_cw_recovers_constructed_bath(params):
    target = 0.140
    power = params.kappa * (target**params.thermal_exponent - params.t_bath**params.thermal_exponent)
    assert steady_state(params, BiasPoint(0.0), power).temperature == pytest.approx(target, abs=1e-6)
    tb, _ = match_cw_to_bath(params, power, SWEEP)
    assert abs(tb - target) < 2e-3


def test_match_cw_monotone(params):
    temps = [match_cw_to_bath(params, p, SWEEP)[0] for p in (0.0, 5e-12, 2e-11, 4e-11)]
    assert all(a < b for a, b in zip(temps, temps[1:]))


def test_match_cw_rejects_negative(params):
    with pytest.raises(ValueError):
        match_cw_to_bath(params, -1.0, SWEEP)


def test_superconducting_branch(params):
    s = steady_state(params, BiasPoint(1e-5))
    assert resistance(params, s) < 0.01 * params.r_normal
    assert math.isfinite(s.current)
