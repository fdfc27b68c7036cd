"""Electrothermal model of a voltage-biased transition-edge sensor.

The sensor is a logistic resistance step R(T) shunted by ``r_shunt`` and fed
by a bias current source.  Two coupled equations are integrated:

    C dT/dt = I^2 R(T) + P_abs - kappa (T^n - T_bath^n)
    L dI/dt = (I_bias - I) R_s - I R(T)

All public functions are pure; they accept scalars or numpy arrays for the
state so that many transients can be advanced together.
"""

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit


class NoConvergence(RuntimeError):
    """Steady-state search did not settle."""


class StepTooLarge(ValueError):
    """Integrator step exceeds the electrical stiffness cap L/R_n."""


@dataclass(frozen=True)
class TesParams:
    """Static device and circuit constants, SI units throughout."""

    r_normal: float
    r_shunt: float
    t_critical: float
    transition_width: float
    t_bath: float
    heat_capacity: float
    kappa: float
    thermal_exponent: float
    inductance: float
    coupling_efficiency: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or math.isnan(v) or math.isinf(v):
                raise ValueError(f"{f.name} must be a finite number, got {v!r}")
            if v < 0:
                raise ValueError(f"{f.name} must be non-negative, got {v!r}")
        for name in ("r_normal", "r_shunt", "t_critical", "transition_width", "t_bath",
                     "heat_capacity", "kappa", "thermal_exponent", "inductance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.r_shunt >= self.r_normal:
            raise ValueError("r_shunt must be smaller than r_normal")
        if self.coupling_efficiency > 1:
            raise ValueError("coupling_efficiency must lie in [0, 1]")

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def max_step(self):
        """Largest integrator step allowed (s)."""
        return self.inductance / self.r_normal


@dataclass(frozen=True)
class TesState:
    temperature: float
    current: float

    def __post_init__(self):
        t = np.asarray(self.temperature)
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("temperature must be positive and finite")
        if not np.all(np.isfinite(np.asarray(self.current))):
            raise ValueError("current must be finite")


@dataclass(frozen=True)
class BiasPoint:
    bias_current: float

    def __post_init__(self):
        if not math.isfinite(self.bias_current) or self.bias_current < 0:
            raise ValueError("bias_current must be finite and >= 0")


def resistance(params, state):
    """TES resistance for a state or a bare temperature (array-friendly)."""
    t = state.temperature if isinstance(state, TesState) else state
    x = (np.asarray(t, dtype=float) - params.t_critical) / params.transition_width
    r = params.r_normal * expit(x)
    return float(r) if np.ndim(r) == 0 else r


def reconstruct_vtes(params, bias, state):
    """Voltage across the TES inferred from the shunt current."""
    return (bias.bias_current - state.current) * params.r_shunt


def bath_power(params, temperature, t_bath=None):
    """Power flowing to the bath, kappa (T^n - T_bath^n)."""
    tb = params.t_bath if t_bath is None else t_bath
    n = params.thermal_exponent
    return params.kappa * (np.asarray(temperature, dtype=float) ** n - tb**n)


def _static_current(params, bias_current, r):
    # L dI/dt = 0  =>  current divider between shunt and TES
    return bias_current * params.r_shunt / (params.r_shunt + r)


def _residual(params, bias_current, optical_power, t):
    r = resistance(params, t)
    i = _static_current(params, bias_current, r)
    return i * i * r + optical_power - bath_power(params, t)


def steady_state(params, bias, optical_power=0.0, *, tol=1e-6, max_iter=10_000):
    """Self-consistent operating point for a bias and absorbed optical power.

    The search starts on the normal-resistor side and walks down with a damped
    fixed-point iteration on T, step-limited inside the transition; once the power residual changes
    sign the bracket is closed with Brent's method.  Starting from above picks
    the branch reached by sweeping the bias down from the normal state, which
    is how the device is operated.

    Raises
    ------
    NoConvergence
        If ``max_iter`` iterations pass without bracketing the root.
    """
    if optical_power < 0 or not math.isfinite(optical_power):
        raise ValueError("optical_power must be finite and >= 0")
    ib = bias.bias_current
    n = params.thermal_exponent
    tb = params.t_bath
    kappa = params.kappa

    def f(t):
        return _residual(params, ib, optical_power, t)

    def g(t):
        r = resistance(params, t)
        i = _static_current(params, ib, r)
        return (tb**n + (i * i * r + optical_power) / kappa) ** (1.0 / n)

    # Joule heating in the divider never exceeds I_b^2 R_s / 4.
    t_hi = (tb**n + (ib * ib * params.r_shunt / 4 + optical_power) / kappa) ** (1.0 / n)
    t_hi = max(t_hi, params.t_critical + 20 * params.transition_width) * (1 + 1e-9)
    if f(tb) <= 0:
        return TesState(tb, _static_current(params, ib, resistance(params, tb)))

    max_jump = 0.5 * params.transition_width
    zone_hi = params.t_critical + 20 * params.transition_width
    zone_lo = params.t_critical - 20 * params.transition_width
    t = t_hi
    ft = f(t)
    if ft >= 0:
        raise NoConvergence("upper bracket has non-negative residual")
    for _ in range(max_iter):
        t_new = t + 0.5 * (g(t) - t)
        # small steps only where R(T) varies, so no root is stepped over
        if t > zone_hi:
            t_new = max(t_new, zone_hi)
        elif t > zone_lo:
            t_new = max(t_new, t - max_jump)
        t_new = max(t_new, tb)
        f_new = f(t_new)
        if f_new >= 0:
            root = brentq(f, t_new, t, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
            break
        if t - t_new < tol:
            # converged to within tol from above; widen downward until bracketed
            lo, step = t_new, tol
            while f(lo) < 0:
                lo = max(lo - step, tb)
                step *= 2
            root = brentq(f, lo, t_new, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
            break
        t = t_new
    else:
        raise NoConvergence(f"steady state not found after {max_iter} iterations "
                            f"(bias={ib:g} A, optical_power={optical_power:g} W)")
    return TesState(root, _static_current(params, ib, resistance(params, root)))


def derivatives(params, temperature, current, bias_current, absorbed_power):
    """Right-hand side (dT/dt, dI/dt)."""
    r = resistance(params, temperature)
    joule = current * current * r
    dT = (joule + absorbed_power - bath_power(params, temperature)) / params.heat_capacity
    dI = ((bias_current - current) * params.r_shunt - current * r) / params.inductance
    return dT, dI


def _rk4(params, t, i, ib, p, dt):
    a1, b1 = derivatives(params, t, i, ib, p)
    a2, b2 = derivatives(params, t + 0.5 * dt * a1, i + 0.5 * dt * b1, ib, p)
    a3, b3 = derivatives(params, t + 0.5 * dt * a2, i + 0.5 * dt * b2, ib, p)
    a4, b4 = derivatives(params, t + dt * a3, i + dt * b3, ib, p)
    return (t + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
            i + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4))


def _check_dt(params, dt):
    if not dt > 0:
        raise StepTooLarge("dt must be positive")
    if dt > params.max_step * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:g} s exceeds L/R_n={params.max_step:g} s")


def step(params, state, bias, absorbed_power, dt):
    """Advance one classical RK4 step with the absorbed power held constant."""
    _check_dt(params, dt)
    t, i = _rk4(params, np.asarray(state.temperature, dtype=float),
                np.asarray(state.current, dtype=float), bias.bias_current, absorbed_power, dt)
    return TesState(t if np.ndim(t) else float(t), i if np.ndim(i) else float(i))


def integrate(params, state, bias, power_samples, dt):
    """Integrate over a sampled absorbed-power record.

    ``power_samples`` has shape ``(n_steps,)`` or ``(n_steps, k)`` for ``k``
    independent transients; the initial state broadcasts against the trailing
    axis.  Returns ``(temperature, current)`` arrays with ``n_steps + 1`` rows,
    the first row being the initial state.
    """
    _check_dt(params, dt)
    power = np.asarray(power_samples, dtype=float)
    tail = power.shape[1:]
    t = np.broadcast_to(np.asarray(state.temperature, dtype=float), tail).copy()
    i = np.broadcast_to(np.asarray(state.current, dtype=float), tail).copy()
    temps = np.empty((power.shape[0] + 1,) + tail)
    currs = np.empty_like(temps)
    temps[0], currs[0] = t, i
    ib = bias.bias_current
    for k in range(power.shape[0]):
        t, i = _rk4(params, t, i, ib, power[k], dt)
        temps[k + 1], currs[k + 1] = t, i
    return temps, currs


def iv_curve(params, bias_sweep, *, t_bath=None, cw_power=0.0):
    """Steady-state (V_TES, I_TES) pairs for each bias in ``bias_sweep``.

    Either the bath temperature or the absorbed CW power (or both) may differ
    from the profile.  Returns an ``(n, 2)`` array.
    """
    sweep = list(bias_sweep)
    if not sweep:
        raise ValueError("bias_sweep must be non-empty")
    currents = [b.bias_current for b in sweep]
    d = np.diff(currents)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise ValueError("bias_sweep must be monotone")
    p = params if t_bath is None else params.with_(t_bath=t_bath)
    out = np.empty((len(sweep), 2))
    for k, b in enumerate(sweep):
        try:
            s = steady_state(p, b, cw_power)
        except NoConvergence as exc:
            raise NoConvergence(f"at bias point {k} ({b.bias_current:g} A): {exc}") from exc
        out[k] = reconstruct_vtes(p, b, s), s.current
    return out


def bias_sweep(start, stop, num):
    return [BiasPoint(float(x)) for x in np.linspace(start, stop, num)]


def _golden_min(fun, a, b, tol):
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2


def match_cw_to_bath(params, cw_power, bias_sweep, *, tol=1e-6):
    """Bath temperature whose dark I-V curve best matches the illuminated one.

    Curves are compared by RMS difference of I_TES at identical bias points.
    Returns ``(t_bath_equivalent, rms_residual)``.
    """
    if cw_power < 0:
        raise ValueError("cw_power must be >= 0")
    target = iv_curve(params, bias_sweep, cw_power=cw_power)[:, 1]

    def cost(tb):
        return float(np.sqrt(np.mean((iv_curve(params, bias_sweep, t_bath=tb)[:, 1] - target) ** 2)))

    lo = params.t_bath
    hi = params.t_critical + 0.020
    best = _golden_min(cost, lo, hi, tol)
    # the golden search never evaluates the bracket ends themselves
    cands = [(cost(best), best), (cost(lo), lo)]
    res, tb = min(cands)
    return tb, res
