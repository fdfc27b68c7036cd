"""SQUID readout chain, pulse-height extraction and photon-number discrimination."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import TrialStream


class WindowOutOfRange(ValueError):
    """Requested analysis window falls outside the recorded trace."""


class FitFailed(RuntimeError):
    """Photon-number peaks could not be resolved."""


@dataclass(frozen=True)
class ReadoutParams:
    gain: float = 0.375e6  # V/A, i.e. 0.375 V/uA
    noise_sigma: float = 0.0
    sample_period: float = 8e-9
    window: float = 5e-6
    baseline_span: float = 10e-6

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.window <= 0 or self.sample_period <= 0 or self.baseline_span <= 0:
            raise ValueError("window, sample_period and baseline_span must be positive")


@dataclass
class VoltageTrace:
    sample_period: float
    samples: np.ndarray
    trigger_times: list = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        span = len(self.samples) * self.sample_period
        for t in self.trigger_times:
            if t < 0 or t > span:
                raise ValueError(f"trigger {t:g} s outside trace span {span:g} s")

    @property
    def times(self):
        return np.arange(len(self.samples)) * self.sample_period

    def to_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["time_s", "vout_V"])
            for t, v in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, trigger_times=()):
        rows = _read_csv_rows(path)
        if rows[0] != ["time_s", "vout_V"]:
            raise ValueError(f"{path}: expected header time_s,vout_V")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 1.0
        return cls(dt, data[:, 1], list(trigger_times))


@dataclass(frozen=True)
class PulseRecord:
    trigger_time: float
    v_max: float


@dataclass(frozen=True)
class DiscriminationThresholds:
    boundaries: tuple
    means: tuple = ()
    sigmas: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.size == 0 or np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be non-empty and strictly increasing")

    @property
    def single_photon_threshold(self):
        return float(self.boundaries[0])

    @property
    def max_n(self):
        return len(self.boundaries)

    def to_config(self):
        """Section dict for the key = value config format."""
        out = {"boundaries": ", ".join(repr(float(x)) for x in self.boundaries),
               "single_photon_threshold": repr(self.single_photon_threshold)}
        for key in ("means", "sigmas", "weights"):
            vals = getattr(self, key)
            if vals:
                out[key] = ", ".join(repr(float(x)) for x in vals)
        return out

    @classmethod
    def from_config(cls, section):
        def floats(key):
            raw = section.get(key, "")
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return cls(floats("boundaries"), floats("means"), floats("sigmas"), floats("weights"))


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(line for line in fh if not line.startswith("#"))]


def trace_to_vout(readout, i_tes_trace, baseline_current, rng_seed, trial=0, sample_period=None):
    """Scale a TES current record to V_out and add white Gaussian noise.

    ``i_tes_trace`` is sampled at ``sample_period`` (defaults to the readout
    sample period).  The returned trace is ``gain * I_TES + noise``; the
    baseline is prepended as ``baseline_span`` of steady signal so that
    :func:`extract_vmax` can estimate it, and the trigger sits at its end.
    """
    dt = readout.sample_period if sample_period is None else sample_period
    i_tes = np.asarray(i_tes_trace, dtype=float)
    n_pre = int(round(readout.baseline_span / dt))
    current = np.concatenate([np.full(n_pre, float(baseline_current)), i_tes])
    v = readout.gain * current
    if readout.noise_sigma > 0:
        v = v + readout.noise_sigma * TrialStream(rng_seed, "readout-noise", len(v)).normals(trial, 1)[0]
    return VoltageTrace(dt, v, [n_pre * dt])


def extract_vmax(trace, trigger, window, baseline_span=10e-6):
    """Largest drop below the pre-trigger baseline within ``[trigger, trigger + window]``.

    Detections reduce I_TES and hence V_out, so the drop is reported as a
    positive number.  The baseline is the mean of the ``baseline_span``
    preceding the trigger.
    """
    dt = trace.sample_period
    n = len(trace.samples)
    i0 = int(round(trigger / dt))
    i1 = i0 + int(round(window / dt))
    ib = i0 - int(round(baseline_span / dt))
    if i0 < 0 or i1 > n or ib < 0:
        raise WindowOutOfRange(
            f"window [{trigger:g}, {trigger + window:g}] s with {baseline_span:g} s baseline "
            f"does not fit a {n * dt:g} s trace")
    baseline = trace.samples[ib:i0].mean() if i0 > ib else trace.samples[i0]
    drop = baseline - trace.samples[i0:i1 + 1 if i1 < n else n]
    return PulseRecord(float(trigger), float(drop.max()))


def vmax_for_trials(signal_drop, readout, rng_seed, trials, purpose="readout-noise", chunk=1000):
    """Vectorised V_max for trial indices ``trials`` (a ``range``).

    Uses the same noise layout per trial as :func:`trace_to_vout` applied to
    a trace of ``baseline_span`` steady signal followed by ``signal_drop``.
    """
    drop = np.asarray(signal_drop, dtype=float)
    n_pre = int(round(readout.baseline_span / readout.sample_period))
    n_win = len(drop)
    out = np.empty(len(trials))
    if readout.noise_sigma == 0:
        out[:] = drop.max()
        return out
    stream = TrialStream(rng_seed, purpose, n_pre + n_win)
    start = trials.start
    for k in range(0, len(trials), chunk):
        m = min(chunk, len(trials) - k)
        noise = readout.noise_sigma * stream.normals(start + k, m)
        baseline = noise[:, :n_pre].mean(axis=1)
        out[k:k + m] = (baseline[:, None] - (noise[:, n_pre:] - drop[None, :])).max(axis=1)
    return out


def histogram(records, bin_width):
    """Counts of V_max in bins of ``bin_width`` aligned to multiples of it."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    v = np.array([r.v_max if isinstance(r, PulseRecord) else r for r in records], dtype=float)
    if v.size == 0:
        return []
    idx = np.floor(v / bin_width + 0.5).astype(np.int64)
    lo, hi = idx.min(), idx.max()
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    return [(float((lo + k) * bin_width), int(c)) for k, c in enumerate(counts) if c]


def histogram_to_csv(hist, path, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["bin_center_V", "count"])
        for center, count in hist:
            w.writerow([repr(center), count])


def histogram_from_csv(path):
    rows = _read_csv_rows(path)
    if rows[0] != ["bin_center_V", "count"]:
        raise ValueError(f"{path}: expected header bin_center_V,count")
    return [(float(a), int(b)) for a, b in rows[1:]]


def _normal_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))


def fit_mixture(values, n_components, *, max_iter=500, tol=1e-10):
    """1-D Gaussian mixture by expectation-maximisation.

    Means start evenly spaced from the vacuum peak, i.e. proportional to the
    photon number; the spacing is the one maximising the initial likelihood.
    Returns ``(weights, means, sigmas)`` sorted by mean.
    """
    x = np.asarray(values, dtype=float)
    k = n_components
    lo, hi = np.percentile(x, [1, 99.5])
    spread = max(hi - lo, 1e-30)
    mu0 = np.median(x[x <= np.percentile(x, 20)])
    best = None
    for spacing in np.linspace(spread / (4 * k), spread, 60):
        mu = mu0 + spacing * np.arange(k)
        s = np.full(k, spacing / 4)
        ll = np.log(np.mean([_normal_pdf(x, m, sd) for m, sd in zip(mu, s)], axis=0) + 1e-300).sum()
        if best is None or ll > best[0]:
            best = (ll, mu, s)
    _, mu, sigma = best
    w = np.full(k, 1.0 / k)
    floor = 1e-6 * spread
    prev = -np.inf
    for _ in range(max_iter):
        dens = w[:, None] * np.array([_normal_pdf(x, m, s) for m, s in zip(mu, sigma)]) + 1e-300
        total = dens.sum(axis=0)
        resp = dens / total
        ll = np.log(total).sum()
        nk = resp.sum(axis=1) + 1e-12
        w = nk / len(x)
        mu = (resp @ x) / nk
        sigma = np.sqrt(np.maximum((resp * (x[None, :] - mu[:, None]) ** 2).sum(axis=1) / nk, floor**2))
        if abs(ll - prev) < tol * abs(ll):
            break
        prev = ll
    order = np.argsort(mu)
    return w[order], mu[order], sigma[order]


def _log_likelihood(x, w, mu, sigma):
    dens = sum(wk * _normal_pdf(x, m, s) for wk, m, s in zip(w, mu, sigma))
    return float(np.log(dens + 1e-300).sum())


def calibrate_thresholds(records, max_n, *, min_events=200, min_separation=2.0):
    """Fit ``max_n + 1`` photon-number peaks and place boundaries at midpoints.

    Raises
    ------
    FitFailed
        When a peak collects fewer than ``min_events`` events or two
        neighbouring peaks are closer than ``min_separation`` times their
        combined width, i.e. the energy resolution cannot separate them.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    v = np.array([r.v_max if isinstance(r, PulseRecord) else r for r in records], dtype=float)
    if v.size < min_events * (max_n + 1):
        raise FitFailed(f"need at least {min_events * (max_n + 1)} events, got {v.size}")
    # A Poisson calibration run always has a tail above max_n; offer the fit
    # one overflow component and keep it when BIC prefers it.
    fits = [fit_mixture(v, max_n + 1), fit_mixture(v, max_n + 2)]
    bic = [3 * len(f[0]) * np.log(v.size) - 2 * _log_likelihood(v, *f) for f in fits]
    w, mu, sigma = fits[int(np.argmin(bic))]
    w, mu, sigma = w[: max_n + 1], mu[: max_n + 1], sigma[: max_n + 1]
    counts = w * v.size
    for k in range(max_n + 1):
        if counts[k] < min_events:
            raise FitFailed(f"peak {k} holds only {counts[k]:.0f} events")
    for k in range(max_n):
        sep = (mu[k + 1] - mu[k]) / np.hypot(sigma[k], sigma[k + 1])
        if sep < min_separation:
            raise FitFailed(f"peaks {k} and {k + 1} overlap (separation {sep:.2f} sigma)")
    boundaries = tuple(float(b) for b in 0.5 * (mu[1:] + mu[:-1]))
    return DiscriminationThresholds(boundaries, tuple(map(float, mu)),
                                    tuple(map(float, sigma)), tuple(map(float, w)))


def assign_photon_number(record, thresholds):
    """Bin index of a pulse height; the top bin means ``max_n`` or more."""
    v = record.v_max if isinstance(record, PulseRecord) else record
    return int(np.searchsorted(np.asarray(thresholds.boundaries), v, side="right"))
