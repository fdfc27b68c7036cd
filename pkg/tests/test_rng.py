import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from tesfake.rng import TrialStream, binomial_from_uniforms, poisson_from_uniform


def test_chunking_does_not_change_draws():
    s = TrialStream(7, "x", 5)
    whole = s.uniforms(0, 100)
    parts = np.vstack([s.uniforms(0, 30), s.uniforms(30, 45), s.uniforms(75, 25)])
    assert np.array_equal(whole, parts)


@given(st.integers(0, 10**6), st.integers(1, 9))
def test_single_trial_matches_block(start, per_trial):
    s = TrialStream(3, "y", per_trial)
    block = s.uniforms(start, 4)
    assert np.array_equal(block[2], s.uniforms(start + 2, 1)[0])


def test_purposes_and_seeds_are_independent():
    a = TrialStream(1, "noise", 4).uniforms(0, 10)
    b = TrialStream(1, "photons", 4).uniforms(0, 10)
    c = TrialStream(2, "noise", 4).uniforms(0, 10)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_uniform_range_and_moments():
    u = TrialStream(0, "m", 8).uniforms(0, 20_000)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


def test_normals_moments():
    z = TrialStream(0, "n", 10).normals(0, 20_000).ravel()
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


def test_poisson_and_binomial_helpers():
    u = TrialStream(5, "p", 1).uniforms(0, 100_000)[:, 0]
    n = poisson_from_uniform(u, 2.5)
    assert abs(n.mean() - 2.5) < 0.03
    assert np.all(poisson_from_uniform(u[:10], 0.0) == 0)
    assert binomial_from_uniforms([[0.1, 0.6, 0.3]], 0.5)[0] == 2
