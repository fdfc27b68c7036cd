"""Photon energies, weak-coherent photon statistics and absorbed-power waveforms."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .rng import TrialStream, poisson_from_uniform


class SamplingTooCoarse(ValueError):
    """Sample period too long to resolve a pulse."""


def photon_energy(wavelength):
    """hc/lambda in joules."""
    if np.any(np.asarray(wavelength) <= 0):
        raise ValueError("wavelength must be positive")
    return PLANCK * SPEED_OF_LIGHT / wavelength


def pulse_energy(n_photons, wavelength):
    if np.any(np.asarray(n_photons) < 0):
        raise ValueError("n_photons must be >= 0")
    return n_photons * photon_energy(wavelength)


def sample_photon_number(mean, rng_seed, trial=0, count=None, purpose="photons"):
    """Poisson photon number(s) for trial index ``trial`` (or ``count`` trials
    starting there) from the counter-based stream."""
    if mean < 0:
        raise ValueError("mean must be >= 0")
    stream = TrialStream(rng_seed, purpose, 1)
    n = 1 if count is None else count
    draws = poisson_from_uniform(stream.uniforms(trial, n)[:, 0], mean)
    return int(draws[0]) if count is None else draws


@dataclass(frozen=True)
class PhotonPulse:
    wavelength: float
    mean_photon_number: float
    width: float
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.mean_photon_number < 0:
            raise ValueError("mean_photon_number must be >= 0")

    @property
    def energy(self):
        return pulse_energy(self.mean_photon_number, self.wavelength)


@dataclass(frozen=True)
class CwFloor:
    power: float
    wavelength: float = 1550e-9

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("CW power must be >= 0")


@dataclass
class OpticalWaveform:
    """Absorbed optical power sampled on a uniform grid starting at t = 0."""

    sample_period: float
    absorbed_power_samples: np.ndarray
    components: list = field(default_factory=list)

    @property
    def times(self):
        return np.arange(len(self.absorbed_power_samples)) * self.sample_period

    @property
    def energy(self):
        return float(np.sum(self.absorbed_power_samples) * self.sample_period)

    def to_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["time_s", "power_W"])
            for t, p in zip(self.times, self.absorbed_power_samples):
                w.writerow([repr(float(t)), repr(float(p))])


def build_waveform(floor, pulses, repetition_rate, duration, coupling, sample_period):
    """Render a CW floor plus rectangular pulses into absorbed power.

    Pulses are repeated every ``1/repetition_rate`` from their arrival time
    when ``repetition_rate`` is positive; each window carries the pulse's
    energy exactly, with partially covered edge samples weighted by overlap.
    Bright light is attenuated deterministically by ``coupling``.
    """
    if not 0 <= coupling <= 1:
        raise ValueError("coupling must lie in [0, 1]")
    if duration <= 0 or sample_period <= 0:
        raise ValueError("duration and sample_period must be positive")
    pulses = list(pulses)
    for p in pulses:
        if sample_period > p.width / 4 * (1 + 1e-9):
            raise SamplingTooCoarse(
                f"sample_period {sample_period:g} s exceeds width/4 for a {p.width:g} s pulse")
    if pulses and repetition_rate and duration < 1.0 / repetition_rate * (1 - 1e-9):
        raise ValueError("duration must cover at least one repetition period")

    n = int(round(duration / sample_period))
    power = np.full(n, float(floor.power) if floor is not None else 0.0)
    components = []
    if floor is not None:
        components.append(("cw", floor))
    edges = np.arange(n + 1) * sample_period
    for p in pulses:
        starts = [p.arrival_time]
        if repetition_rate:
            period = 1.0 / repetition_rate
            starts = list(np.arange(p.arrival_time, duration, period))
        for t0 in starts:
            t1 = t0 + p.width
            overlap = np.clip(np.minimum(edges[1:], t1) - np.maximum(edges[:-1], t0), 0, None)
            power += (p.energy / p.width) * overlap / sample_period
            components.append(("pulse", p, float(t0)))
    return OpticalWaveform(sample_period, coupling * power, components)
