"""BB84 intercept-and-resend with faked states against blinded detectors."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .rng import TrialStream

ABORT_QBER = 0.11
DOUBLE_CLICK_RULES = ("random", "discard")


class Undefined(ValueError):
    """QBER has no value when nothing is ever detected."""


@dataclass(frozen=True)
class AttackScenario:
    signal_wavelength: float = 780e-9
    attack_wavelength: float = 1550e-9
    blinding_power: float = 0.25e-9
    fake_pulse_energy: float = 2.4e-18
    channel_transmission: float = 1.0
    trials: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.channel_transmission <= 1:
            raise ValueError("channel_transmission must lie in (0, 1]")
        if self.signal_wavelength <= 0 or self.attack_wavelength <= 0:
            raise ValueError("wavelengths must be positive")
        if self.blinding_power < 0 or self.fake_pulse_energy < 0:
            raise ValueError("blinding_power and fake_pulse_energy must be >= 0")


@dataclass(frozen=True)
class ClickModel:
    """Click probabilities of Bob's blinded detectors for Eve's fake pulses.

    ``p_click_full``: a full-energy pulse sent into one detector registers.
    ``p_click_half``: a basis-mismatched pulse, split into two half-energy
    pulses, registers on at least one detector.  The per-detector
    probability follows from independence, ``1 - (1 - q)^2 = p_click_half``.
    """

    p_click_full: float
    p_click_half: float
    double_click_rule: str = "random"
    ci_full: tuple = ()
    ci_half: tuple = ()

    def __post_init__(self):
        for name in ("p_click_full", "p_click_half"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
        if self.double_click_rule not in DOUBLE_CLICK_RULES:
            raise ValueError(f"double_click_rule must be one of {DOUBLE_CLICK_RULES}")

    @property
    def p_detector_half(self):
        return 1.0 - math.sqrt(1.0 - self.p_click_half)


@dataclass(frozen=True)
class SiftedKeyStats:
    sent: int
    sifted: int
    sifted_detections: int
    errors: int
    double_clicks: int
    qber: float
    induced_loss: float
    verdict: str

    def __post_init__(self):
        if not 0 <= self.errors <= self.sifted_detections <= self.sifted <= self.sent:
            raise ValueError("inconsistent tallies")

    @property
    def qber_sigma(self):
        n = self.sifted_detections
        return math.sqrt(self.qber * (1 - self.qber) / n) if n else float("nan")

    def qber_ci(self, confidence=0.95):
        if self.sifted_detections == 0:
            return (float("nan"), float("nan"))
        ci = binomtest(self.errors, self.sifted_detections).proportion_ci(confidence, method="wilson")
        return (float(ci.low), float(ci.high))


def analytic_qber(model):
    """Closed-form QBER, p_half / (2 (p_full + p_half)).

    With matched Eve/Bob bases (probability 1/2) the full pulse clicks with
    ``p_full`` and is always right; otherwise the split pulse registers with
    ``p_half`` and is right half of the time.
    """
    pf, ph = model.p_click_full, model.p_click_half
    if pf == 0 and ph == 0:
        raise Undefined("no detections: p_click_full = p_click_half = 0")
    return ph / (2 * (pf + ph))


def loss_budget(stats, channel_transmission):
    """``"covert"`` if the attack's loss fits inside the honest channel loss."""
    if not 0 < channel_transmission <= 1:
        raise ValueError("channel_transmission must lie in (0, 1]")
    return "covert" if stats.induced_loss <= 1 - channel_transmission + 1e-12 else "detectable-by-loss"


# uniforms per trial: alice bit, alice basis, eve basis, eve guess, bob basis,
# detector 0 click, detector 1 click, double-click tie break
_PER_TRIAL = 8


def run_bb84_attack(scenario, model=None, *, chunk=200_000):
    """Monte Carlo of ``scenario.trials`` BB84 rounds.

    ``model=None`` runs the protocol without Eve and with ideal detection,
    which is the reference for the induced loss.
    """
    stream = TrialStream(scenario.seed, "bb84", _PER_TRIAL)
    sifted = detections = errors = doubles = 0
    for start in range(0, scenario.trials, chunk):
        m = min(chunk, scenario.trials - start)
        u = stream.uniforms(start, m)
        a_bit = u[:, 0] < 0.5
        a_basis = u[:, 1] < 0.5
        b_basis = u[:, 4] < 0.5
        keep = a_basis == b_basis
        if model is None:
            click = np.ones(m, dtype=bool)
            b_bit = a_bit
            dbl = np.zeros(m, dtype=bool)
        else:
            e_basis = u[:, 2] < 0.5
            e_bit = np.where(e_basis == a_basis, a_bit, u[:, 3] < 0.5)
            match = e_basis == b_basis
            q = model.p_detector_half
            # detector k registers bit value k
            c0 = np.where(match, (~e_bit) & (u[:, 5] < model.p_click_full), u[:, 5] < q)
            c1 = np.where(match, e_bit & (u[:, 5] < model.p_click_full), u[:, 6] < q)
            dbl = c0 & c1
            b_bit = np.where(dbl, u[:, 7] < 0.5, c1)
            click = c0 | c1
            if model.double_click_rule == "discard":
                click &= ~dbl
        sel = keep & click
        sifted += int(keep.sum())
        detections += int(sel.sum())
        errors += int((sel & (b_bit != a_bit)).sum())
        doubles += int((keep & dbl).sum())
    qber = errors / detections if detections else float("nan")
    # ideal honest detection registers every sifted round
    loss = 1.0 - detections / sifted if sifted else 0.0
    if detections and qber >= ABORT_QBER:
        verdict = "aborted-by-qber"
    else:
        verdict = "covert" if loss <= 1 - scenario.channel_transmission + 1e-12 else "detectable-by-loss"
    return SiftedKeyStats(scenario.trials, sifted, detections, errors, doubles, qber, loss, verdict)


def _rate_with_ci(successes, trials):
    ci = binomtest(successes, trials).proportion_ci(0.95, method="wilson")
    return successes / trials, (float(ci.low), float(ci.high))


def click_model_from_physics(detector, scenario, calibration, thresholds, calibration_trials, rng_seed,
                             double_click_rule="random"):
    """Click probabilities from simulated fake pulses on one blinded detector.

    Full-energy pulses give ``p_click_full``; half-energy pulses give the
    per-detector probability ``q``, aggregated over Bob's two detectors as
    ``1 - (1 - q)^2``.  A click is V_max at or above the single-photon
    threshold.
    """
    if calibration_trials < 1:
        raise ValueError("calibration_trials must be >= 1")
    th = thresholds.single_photon_threshold
    cw = calibration.cw_power
    e = scenario.fake_pulse_energy
    lam = scenario.attack_wavelength
    v_full = detector.bright_pulse_vmax(e, cw, calibration_trials, rng_seed, wavelength=lam)
    v_half = detector.bright_pulse_vmax(e / 2, cw, calibration_trials, rng_seed,
                                        start_trial=calibration_trials, wavelength=lam)
    p_full, ci_full = _rate_with_ci(int(np.sum(v_full >= th)), calibration_trials)
    q, ci_q = _rate_with_ci(int(np.sum(v_half >= th)), calibration_trials)

    def agg(x):
        return 1.0 - (1.0 - x) ** 2

    return ClickModel(p_full, agg(q), double_click_rule, ci_full, (agg(ci_q[0]), agg(ci_q[1])))
