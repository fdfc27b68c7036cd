"""End-to-end detector: absorbed light -> TES transient -> V_out -> V_max.

The TES transient for a given absorbed energy is deterministic, so it is
integrated once per distinct energy and the readout noise is then added per
trial.  This keeps 10^4-trial scans cheap without changing the result.
"""

import math
from dataclasses import dataclass

import numpy as np

from .optics import CwFloor, PhotonPulse, build_waveform, photon_energy
from .readout import PulseRecord, ReadoutParams, vmax_for_trials
from .rng import TrialStream, poisson_from_uniform
from .tes import BiasPoint, TesParams, integrate, steady_state

PULSE_WIDTH = 16e-9


@dataclass(frozen=True)
class Detector:
    """A biased TES with its readout.

    Optical inputs (CW power, pulse energy, mean photon number) are given at
    the fiber; ``params.coupling_efficiency`` converts them to what the
    absorber receives.
    """

    params: TesParams
    bias: BiasPoint
    readout: ReadoutParams
    pulse_width: float = PULSE_WIDTH
    wavelength_coupling: tuple = ()  # ((nm, efficiency), ...) overrides

    def coupling_at(self, wavelength):
        """Coupling efficiency for light of ``wavelength`` (m)."""
        nm = wavelength * 1e9
        for key, value in self.wavelength_coupling:
            if abs(key - nm) < 1e-6:
                return value
        return self.params.coupling_efficiency

    @property
    def dt(self):
        limit = min(self.params.max_step, self.pulse_width / 4)
        m = max(1, math.ceil(self.readout.sample_period / limit - 1e-9))
        return self.readout.sample_period / m

    @property
    def decimation(self):
        return int(round(self.readout.sample_period / self.dt))

    @property
    def window_samples(self):
        return int(round(self.readout.window / self.readout.sample_period)) + 1

    def absorbed_cw(self, cw_power, wavelength=1550e-9):
        return self.coupling_at(wavelength) * cw_power

    def operating_point(self, cw_power=0.0):
        return steady_state(self.params, self.bias, self.absorbed_cw(cw_power))

    def drop_records(self, absorbed_energies, cw_power=0.0):
        """Noiseless ``gain * (I_0 - I_TES)`` over the analysis window.

        One row per absorbed energy (J); columns are readout samples starting
        at the trigger.
        """
        energies = np.atleast_1d(np.asarray(absorbed_energies, dtype=float))
        state = self.operating_point(cw_power)
        dt = self.dt
        n_steps = (self.window_samples - 1) * self.decimation
        # unit-energy pulse shape at coupling 1: exact rectangle, energy 1 J
        ref = build_waveform(None, [PhotonPulse(1550e-9, 1.0, self.pulse_width, 0.0)], 0,
                             n_steps * dt, 1.0, dt)
        shape = ref.absorbed_power_samples / photon_energy(1550e-9)
        cw_abs = self.absorbed_cw(cw_power)
        power = cw_abs + shape[:, None] * energies[None, :]
        _, currents = integrate(self.params, state, self.bias, power, dt)
        drops = self.readout.gain * (state.current - currents[:: self.decimation])
        return drops.T

    def cw_waveform(self, cw_power, pulse_energy, duration):
        """Absorbed-power waveform for one fake pulse on a CW floor (for export)."""
        return build_waveform(CwFloor(cw_power), [PhotonPulse(1550e-9, pulse_energy / photon_energy(1550e-9),
                                                               self.pulse_width, 0.0)],
                              0, duration, self.coupling_at(1550e-9), self.dt)

    def vmax_for_energies(self, absorbed, cw_power, rng_seed, start_trial=0, purpose="readout-noise"):
        """V_max per trial, trial ``start_trial + k`` absorbing ``absorbed[k]`` joules."""
        absorbed = np.asarray(absorbed, dtype=float)
        out = np.empty(absorbed.size)
        uniq, inverse = np.unique(absorbed, return_inverse=True)
        drops = self.drop_records(uniq, cw_power)
        for j in range(len(uniq)):
            idx = np.flatnonzero(inverse == j)
            # contiguous runs keep the per-trial noise identical to a serial run
            for run in np.split(idx, np.flatnonzero(np.diff(idx) != 1) + 1):
                trials = range(start_trial + int(run[0]), start_trial + int(run[-1]) + 1)
                out[run] = vmax_for_trials(drops[j], self.readout, rng_seed, trials, purpose)
        return out

    def sample_absorbed_photons(self, mean_at_fiber, trials, rng_seed, start_trial=0,
                                wavelength=1550e-9):
        """Poisson photon numbers reaching the absorber.

        Binomial thinning of a Poisson number is again Poisson, so the mean
        is simply scaled by the coupling.
        """
        mean = self.coupling_at(wavelength) * mean_at_fiber
        u = TrialStream(rng_seed, "photons", 1).uniforms(start_trial, trials)[:, 0]
        return poisson_from_uniform(u, mean)

    def photon_records(self, n_absorbed, wavelength, rng_seed, cw_power=0.0, start_trial=0):
        """PulseRecords for trials absorbing ``n_absorbed[k]`` photons of ``wavelength``."""
        energies = np.asarray(n_absorbed, dtype=float) * photon_energy(wavelength)
        v = self.vmax_for_energies(energies, cw_power, rng_seed, start_trial)
        return [PulseRecord(0.0, float(x)) for x in v]

    def weak_coherent_run(self, mean_at_fiber, wavelength, trials, rng_seed, cw_power=0.0):
        """Return ``(photon_numbers, v_max)`` for a weak-coherent calibration run."""
        n = self.sample_absorbed_photons(mean_at_fiber, trials, rng_seed, wavelength=wavelength)
        v = self.vmax_for_energies(n * photon_energy(wavelength), cw_power, rng_seed)
        return n, v

    def bright_pulse_vmax(self, pulse_energy, cw_power, trials, rng_seed, start_trial=0,
                          wavelength=1550e-9):
        """V_max of ``trials`` identical bright pulses (energy at the fiber)."""
        absorbed = np.full(trials, self.coupling_at(wavelength) * pulse_energy)
        return self.vmax_for_energies(absorbed, cw_power, rng_seed, start_trial)
