"""Bounded particle swarm minimiser with constriction coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SwarmResult:
    x: np.ndarray
    cost: float
    iterations: int
    history: list
    stalled: bool
    personal_best_x: np.ndarray
    personal_best_cost: np.ndarray


def particle_swarm(cost, lower, upper, *, n_particles=60, inertia=0.729,
                   cognitive=1.494, social=1.494, max_iter=200, stall_iter=30,
                   tol=1e-6, seed=0) -> SwarmResult:
    """Minimise ``cost(x)`` over the box ``[lower, upper]``.

    Every particle draws from its own generator spawned from ``seed``, so the
    run is reproducible and independent of evaluation order. The search
    stops after ``max_iter`` iterations, or earlier once the best cost has
    improved by less than ``tol`` (relative) over ``stall_iter`` iterations.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("bounds must be 1-D arrays of equal length")
    if np.any(~(upper > lower)):
        raise ValueError("every upper bound must exceed its lower bound")
    span = upper - lower
    dim = len(lower)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in seed.spawn(n_particles)]

    x = np.array([lower + span * r.random(dim) for r in rngs])
    v = np.array([span * (2 * r.random(dim) - 1) for r in rngs])
    f = np.array([cost(xi) for xi in x], dtype=float)
    pbest_x, pbest_f = x.copy(), f.copy()
    g = int(np.argmin(pbest_f))
    history = [float(pbest_f[g])]

    stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        r1 = np.array([r.random(dim) for r in rngs])
        r2 = np.array([r.random(dim) for r in rngs])
        v = (inertia * v + cognitive * r1 * (pbest_x - x)
             + social * r2 * (pbest_x[g] - x))
        v = np.clip(v, -span, span)
        x = x + v
        hit = (x < lower) | (x > upper)
        x = np.clip(x, lower, upper)
        v[hit] = 0.0
        f = np.array([cost(xi) for xi in x], dtype=float)
        better = f < pbest_f
        pbest_x[better] = x[better]
        pbest_f[better] = f[better]
        g = int(np.argmin(pbest_f))
        history.append(float(pbest_f[g]))
        if it >= stall_iter:
            old = history[-stall_iter - 1]
            if old - history[-1] <= tol * abs(history[-1]):
                stalled = True
                break
    return SwarmResult(pbest_x[g].copy(), float(pbest_f[g]), it, history, stalled,
                       pbest_x, pbest_f)
