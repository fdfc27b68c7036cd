"""Counter-based random streams keyed by (seed, purpose, trial index).

Every trial owns a fixed block of Philox counters, so the numbers a trial
sees do not depend on how trials are chunked or ordered across workers.
"""

import zlib

import numpy as np
from scipy.special import ndtri
from scipy.stats import poisson

_WORDS_PER_COUNTER = 4


def _key(seed, purpose):
    tag = zlib.crc32(str(purpose).encode())
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, tag]).generate_state(2, np.uint64)


class TrialStream:
    """Uniform variates for trial ``i`` drawn from a dedicated counter block.

    Parameters
    ----------
    seed : int
        User-level seed.
    purpose : str
        Distinguishes independent streams derived from the same seed
        (e.g. ``"noise"`` and ``"photons"``).
    per_trial : int
        Number of uniforms each trial consumes.
    """

    def __init__(self, seed, purpose, per_trial):
        if per_trial < 1:
            raise ValueError("per_trial must be >= 1")
        self.seed = int(seed)
        self.purpose = purpose
        self.per_trial = int(per_trial)
        self._blocks = -(-self.per_trial // _WORDS_PER_COUNTER)
        self._key = _key(seed, purpose)

    def uniforms(self, start, count):
        """Return a ``(count, per_trial)`` array of uniforms in (0, 1) for trials
        ``start .. start + count - 1``."""
        if count <= 0:
            return np.empty((0, self.per_trial))
        counter = np.zeros(4, dtype=np.uint64)
        offset = int(start) * self._blocks
        counter[0] = offset & 0xFFFFFFFFFFFFFFFF
        counter[1] = offset >> 64
        bg = np.random.Philox(key=self._key, counter=counter)
        words = self._blocks * _WORDS_PER_COUNTER
        raw = bg.random_raw(count * words).reshape(count, words)[:, : self.per_trial]
        # 53-bit mantissa, shifted off zero so ndtri/ppf stay finite
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)

    def normals(self, start, count):
        return ndtri(self.uniforms(start, count))


def poisson_from_uniform(u, mean):
    """Inverse-CDF Poisson draw; vectorised over ``u``."""
    if mean < 0:
        raise ValueError("mean must be >= 0")
    if mean == 0:
        return np.zeros(np.shape(u), dtype=np.int64)
    return poisson.ppf(u, mean).astype(np.int64)


def binomial_from_uniforms(u, p):
    """Binomial thinning: count of entries of ``u`` (last axis) below ``p``."""
    return np.sum(np.asarray(u) < p, axis=-1)
