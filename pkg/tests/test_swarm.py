import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibrolift.swarm import particle_swarm


def sphere(x):
    return float(np.sum((x - 0.3) ** 2))


def test_finds_minimum_of_bowl():
    res = particle_swarm(sphere, [-1, -1, -1], [1, 1, 1], seed=0)
    assert np.allclose(res.x, 0.3, atol=1e-3)
    assert res.cost < 1e-6


def test_rosenbrock_valley():
    def rosen(x):
        return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)
    res = particle_swarm(rosen, [-2, -1], [2, 3], seed=3, max_iter=400, stall_iter=60, tol=1e-12)
    assert np.allclose(res.x, 1.0, atol=2e-2)


def test_same_seed_same_run():
    a = particle_swarm(sphere, [-1, -1], [1, 1], seed=11, max_iter=30)
    b = particle_swarm(sphere, [-1, -1], [1, 1], seed=11, max_iter=30)
    assert np.array_equal(a.x, b.x) and a.history == b.history
    c = particle_swarm(sphere, [-1, -1], [1, 1], seed=12, max_iter=30)
    assert c.history != a.history


def test_stall_stops_early():
    res = particle_swarm(lambda x: 1.0, [0, 0], [1, 1], seed=0, stall_iter=5)
    assert res.stalled and res.iterations == 5


def test_history_monotone_and_bounded():
    res = particle_swarm(sphere, [-1, -1], [1, 1], seed=4, max_iter=50)
    assert all(a >= b for a, b in zip(res.history, res.history[1:]))
    assert len(res.history) == res.iterations + 1


@pytest.mark.parametrize("lo, hi", [([0, 0], [1]), ([0, 1], [1, 1]), ([[0]], [[1]])])
def test_rejects_bad_bounds(lo, hi):
    with pytest.raises(ValueError):
        particle_swarm(sphere, lo, hi)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.floats(-5, 0), width=st.floats(0.01, 5))
def test_every_evaluation_inside_box(seed, lo, width):
    seen = []

    def cost(x):
        seen.append(x.copy())
        return float(np.sum(x))

    res = particle_swarm(cost, [lo, lo], [lo + width, lo + width], seed=seed,
                         n_particles=8, max_iter=10)
    pts = np.array(seen)
    assert np.all(pts >= lo) and np.all(pts <= lo + width)
    assert np.all(res.personal_best_x >= lo) and np.all(res.personal_best_x <= lo + width)
