"""Compiled inner loop of the hybrid stick-slip integrator.

The surface acceleration is constant on every interval between consecutive
knots, so both bodies follow exact constant-acceleration kinematics inside an
interval. The only events that can occur inside an interval are relative
velocity crossings while slipping; those are located by bisection.
"""

import numba
import numpy as np

STICKING = 0
SLIPPING_UP = 1
SLIPPING_DOWN = 2

OK = 0
DIVERGED = 1

# columns of the output buffer
N_COLS = 7


@numba.njit(cache=True)
def classify(mode, rel_v, accel, mass, gravity, static_limit, eps_v, eps_f):
    """Mode that applies from now on, given the current surface acceleration."""
    if mode == STICKING or abs(rel_v) <= eps_v:
        if abs(mass * (accel + gravity)) <= static_limit + eps_f:
            return STICKING
        # slip onset: friction acts along sgn(a_S + g)
        if accel + gravity > 0.0:
            return SLIPPING_DOWN
        return SLIPPING_UP
    if rel_v > 0.0:
        return SLIPPING_UP
    return SLIPPING_DOWN


@numba.njit(cache=True)
def _crossing_time(rel_v, rel_a, span, eps_t):
    # rel_v + rel_a * tau changes sign on [0, span]; bisection keeps hi past it
    side = 1.0 if rel_v > 0.0 else -1.0
    lo = 0.0
    hi = span
    while hi - lo > eps_t:
        mid = 0.5 * (lo + hi)
        if (rel_v + rel_a * mid) * side > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@numba.njit(cache=True)
def integrate(knots, accels, mass, gravity, static_limit, kinetic_force,
              z_s, v_s, z_p, v_p, mode, eps_v, eps_f, eps_t, v_bound, out):
    """Advance the part/surface pair across all intervals of ``knots``.

    Row ``i`` of ``out`` receives ``t, z_s, v_s, a_s, z_p, v_p, mode`` at
    ``knots[i]``, where ``a_s`` and ``mode`` are the values that apply on
    the interval starting there. ``accels`` holds one value per interval,
    optionally followed by the acceleration just after the last knot, which
    then decides the final row's mode. Returns ``(rows_written, status)``.
    """
    n = knots.shape[0] - 1
    for i in range(n):
        a = accels[i]
        mode = classify(mode, v_p - v_s, a, mass, gravity, static_limit,
                        eps_v, eps_f)
        if mode == STICKING or abs(v_p - v_s) <= eps_v:
            v_p = v_s
        out[i, 0] = knots[i]
        out[i, 1] = z_s
        out[i, 2] = v_s
        out[i, 3] = a
        out[i, 4] = z_p
        out[i, 5] = v_p
        out[i, 6] = mode

        rem = knots[i + 1] - knots[i]
        # at most one crossing per interval; extra passes absorb re-slips
        for _ in range(4):
            if mode == STICKING:
                dz = v_s * rem + 0.5 * a * rem * rem
                z_s += dz
                z_p += dz
                v_s += a * rem
                v_p = v_s
                rem = 0.0
                break
            if mode == SLIPPING_UP:
                a_p = -kinetic_force / mass - gravity
            else:
                a_p = kinetic_force / mass - gravity
            rel_v = v_p - v_s
            rel_a = a_p - a
            rel_end = rel_v + rel_a * rem
            if mode == SLIPPING_UP:
                crossed = rel_end <= 0.0
            else:
                crossed = rel_end >= 0.0
            if not crossed or rel_v == 0.0:
                if crossed:
                    # slipping against the relative acceleration: only possible
                    # with inverted (mu_s < mu_k) coefficients, hold the contact
                    mode = STICKING
                    continue
                z_s += v_s * rem + 0.5 * a * rem * rem
                z_p += v_p * rem + 0.5 * a_p * rem * rem
                v_s += a * rem
                v_p += a_p * rem
                if abs(v_p - v_s) <= eps_v:
                    v_p = v_s
                rem = 0.0
                break
            tc = _crossing_time(rel_v, rel_a, rem, eps_t)
            if rem - tc <= eps_t:
                tc = rem
            z_s += v_s * tc + 0.5 * a * tc * tc
            z_p += v_p * tc + 0.5 * a_p * tc * tc
            v_s += a * tc
            v_p = v_s
            rem -= tc
            if rem <= 0.0:
                break
            mode = classify(mode, 0.0, a, mass, gravity, static_limit,
                            eps_v, eps_f)
        if rem > 0.0:
            # unresolved chatter, finish the interval stuck to the surface
            dz = v_s * rem + 0.5 * a * rem * rem
            z_s += dz
            z_p += dz
            v_s += a * rem
            v_p = v_s
            mode = STICKING

        if not (abs(v_p) <= v_bound):
            out[i + 1, 0] = knots[i + 1]
            out[i + 1, 1] = z_s
            out[i + 1, 2] = v_s
            out[i + 1, 3] = a
            out[i + 1, 4] = z_p
            out[i + 1, 5] = v_p
            out[i + 1, 6] = mode
            return i + 2, DIVERGED

    a = accels[accels.shape[0] - 1]
    mode = classify(mode, v_p - v_s, a, mass, gravity, static_limit,
                    eps_v, eps_f)
    if mode == STICKING:
        v_p = v_s
    out[n, 0] = knots[n]
    out[n, 1] = z_s
    out[n, 2] = v_s
    out[n, 3] = a
    out[n, 4] = z_p
    out[n, 5] = v_p
    out[n, 6] = mode
    return n + 1, OK


def allocate(n_knots):
    return np.empty((n_knots, N_COLS))
