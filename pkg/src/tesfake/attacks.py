"""Attack procedures: wavelength photon-number faking and CW blinding with faked states."""

from dataclasses import dataclass

import numpy as np

from .optics import photon_energy
from .tes import TesState, resistance


class NotBlindable(RuntimeError):
    """No CW power on the grid blinds the detector."""


class InsufficientPoints(ValueError):
    """Too few response-curve points inside the requested energy range."""


@dataclass(frozen=True)
class WavelengthFakePlan:
    target_wavelength: float
    target_n: int
    fake_wavelength: float
    fake_n: int
    energy_mismatch: float

    @property
    def target_energy(self):
        return self.target_n * photon_energy(self.target_wavelength)

    @property
    def fake_energy(self):
        return self.fake_n * photon_energy(self.fake_wavelength)


def plan_wavelength_fake(target_n, target_wavelength, fake_wavelength, fake_n=None):
    """How many photons at ``fake_wavelength`` carry the energy of ``target_n``
    photons at ``target_wavelength``.

    ``fake_n`` defaults to the nearest integer; pass it to study a forced
    (wrong) choice.  The residual relative energy error is reported.
    """
    if target_wavelength <= 0 or fake_wavelength <= 0:
        raise ValueError("wavelengths must be positive")
    if target_n < 1:
        raise ValueError("target_n must be >= 1")
    if fake_n is None:
        fake_n = max(1, int(round(target_n * fake_wavelength / target_wavelength)))
    if fake_n < 1:
        raise ValueError("fake_n must be >= 1")
    e_target = target_n * photon_energy(target_wavelength)
    e_fake = fake_n * photon_energy(fake_wavelength)
    return WavelengthFakePlan(target_wavelength, int(target_n), fake_wavelength, int(fake_n),
                              abs(e_fake - e_target) / e_target)


def verify_wavelength_fake(detector, plan, thresholds, trials, rng_seed):
    """Fraction of fake pulses the detector labels as ``plan.target_n``.

    Each trial delivers ``plan.fake_n`` photons of the fake wavelength to the
    absorber; ``thresholds`` must come from a calibration at the target
    wavelength.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    energy = plan.fake_n * photon_energy(plan.fake_wavelength)
    v = detector.vmax_for_energies(np.full(trials, energy), 0.0, rng_seed)
    labels = np.searchsorted(np.asarray(thresholds.boundaries), v, side="right")
    return float(np.mean(labels == plan.target_n))


@dataclass(frozen=True)
class BlindingCalibration:
    cw_power: float
    blinded_state: TesState
    single_photon_response: float
    unblinded_response: float
    fraction_below_threshold: float
    threshold: float
    photon_wavelength: float = 1550e-9
    fake_response_curve: tuple = ()

    def blinded_resistance(self, params):
        return resistance(params, self.blinded_state)


def calibrate_blinding(detector, power_grid, thresholds, *, trials=10_000, rng_seed=0,
                       photon_wavelength=1550e-9, criterion=0.99):
    """Smallest CW power (at the fiber) that blinds the detector.

    Blinded means at least ``criterion`` of the trials with one absorbed
    photon give a V_max below ``thresholds.single_photon_threshold``.

    Raises
    ------
    NotBlindable
        If no power on the grid meets the criterion.
    """
    grid = np.asarray(list(power_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("power_grid must be non-empty")
    if np.any(np.diff(grid) < 0):
        raise ValueError("power_grid must be ascending")
    th = thresholds.single_photon_threshold
    e1 = np.full(trials, photon_energy(photon_wavelength))
    unblinded = float(detector.vmax_for_energies(e1, 0.0, rng_seed).mean())
    best = None
    for cw in grid:
        v = detector.vmax_for_energies(e1, cw, rng_seed)
        frac = float(np.mean(v < th))
        best = frac if best is None else max(best, frac)
        if frac >= criterion:
            return BlindingCalibration(float(cw), detector.operating_point(cw), float(v.mean()),
                                       unblinded, frac, th, photon_wavelength)
    raise NotBlindable(f"best fraction below threshold {best:.4f} < {criterion} over "
                       f"{grid.size} grid powers up to {grid[-1]:g} W")


@dataclass(frozen=True)
class FakeStateResponse:
    """Mean and spread of V_max against fake pulse energy under blinding."""

    energies: np.ndarray
    mean_vmax: np.ndarray
    std_vmax: np.ndarray
    reference_vmax: float
    matching_energy: float = float("nan")
    tolerance: float = 0.2

    @property
    def matched(self):
        return bool(np.isfinite(self.matching_energy))

    def rows(self):
        return list(zip(self.energies.tolist(), self.mean_vmax.tolist(), self.std_vmax.tolist()))


def faked_state_response(detector, calibration, pulse_energy_grid, trials, rng_seed, *, tolerance=0.2):
    """Scan fake pulse energies (at the fiber) under the calibrated blinding.

    The matching energy is where the mean V_max crosses the unblinded
    single-photon V_max, interpolated linearly between grid points; it is
    NaN unless some grid point lies within ``tolerance`` (relative) of it.
    """
    energies = np.asarray(list(pulse_energy_grid), dtype=float)
    if np.any(energies < 0):
        raise ValueError("pulse energies must be >= 0")
    means = np.empty(energies.size)
    stds = np.empty(energies.size)
    for k, e in enumerate(energies):
        v = detector.bright_pulse_vmax(e, calibration.cw_power, trials, rng_seed)
        means[k], stds[k] = v.mean(), v.std()
    ref = calibration.unblinded_response
    match = float("nan")
    if energies.size and np.min(np.abs(means - ref)) <= tolerance * ref:
        above = np.flatnonzero(means >= ref)
        j = int(above[0]) if above.size else energies.size - 1
        if 0 < j < energies.size and means[j] != means[j - 1]:
            f = (ref - means[j - 1]) / (means[j] - means[j - 1])
            match = float(energies[j - 1] + f * (energies[j] - energies[j - 1]))
        else:
            match = float(energies[int(np.argmin(np.abs(means - ref)))])
    return FakeStateResponse(energies, means, stds, ref, match, tolerance)


def superlinearity_index(energies, mean_vmax, energy_range=None):
    """Largest local log-log slope of mean V_max against pulse energy.

    1 for a linear response, 2 for a quadratic one; above 1 means the
    response grows faster than the energy somewhere in the range.
    """
    e = np.asarray(energies, dtype=float)
    v = np.asarray(mean_vmax, dtype=float)
    keep = (e > 0) & (v > 0)
    if energy_range is not None:
        lo, hi = energy_range
        keep &= (e >= lo * (1 - 1e-12)) & (e <= hi * (1 + 1e-12))
    e, v = e[keep], v[keep]
    if e.size < 3:
        raise InsufficientPoints(f"need at least 3 positive points in range, got {e.size}")
    order = np.argsort(e)
    slopes = np.diff(np.log(v[order])) / np.diff(np.log(e[order]))
    return float(np.max(slopes))

