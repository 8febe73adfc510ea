"""Hybrid stick-slip dynamics of a part squeezed against a vertical vibrating surface.

The surface motion is kinematically prescribed. The part follows it while the
required friction stays inside the static cone and slides under kinetic
friction otherwise::

    sticking:  v_P = v_S,   |m (a_S + g)| <= mu_s F_n
    slipping:  a_P = mu_k F_n / m * sgn(v_S - v_P) - g

Positions and velocities are SI; ``z`` points up.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from . import _kernel
from .errors import DivergenceError, NotConvergedError, ValidationError

STANDARD_GRAVITY = 9.81

#: default output steps per drive period
STEPS_PER_PERIOD = 2000
#: relative velocity below which part and surface count as moving together (m/s)
STICK_VELOCITY_TOL = 1e-9
#: slack on the static friction cone test (N)
STICK_FORCE_TOL = 1e-9
#: event localisation tolerance as a fraction of the step
EVENT_TIME_FRACTION = 1e-6


class ContactMode(enum.IntEnum):
    STICKING = _kernel.STICKING
    SLIPPING_UP = _kernel.SLIPPING_UP
    SLIPPING_DOWN = _kernel.SLIPPING_DOWN

    @property
    def label(self) -> str:
        return _MODE_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "ContactMode":
        try:
            return _LABEL_MODES[label]
        except KeyError:
            raise ValidationError(f"unknown contact mode {label!r}") from None


_MODE_LABELS = {
    ContactMode.STICKING: "Sticking",
    ContactMode.SLIPPING_UP: "SlippingUp",
    ContactMode.SLIPPING_DOWN: "SlippingDown",
}
_LABEL_MODES = {v: k for k, v in _MODE_LABELS.items()}


@dataclass(frozen=True)
class FrictionPair:
    """Coulomb coefficients between part and surface.

    ``check_order=False`` admits ``mu_s < mu_k``, which is needed for the
    fictitious coefficients of the horizontal-equivalent problem.
    """

    mu_s: float
    mu_k: float
    check_order: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for name in ("mu_s", "mu_k"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value}")
        if self.mu_k <= 0:
            raise ValidationError(f"mu_k must be positive, got {self.mu_k}")
        if self.check_order:
            if self.mu_s < self.mu_k:
                raise ValidationError(
                    f"mu_s ({self.mu_s}) must be >= mu_k ({self.mu_k})")
        elif self.mu_s < 0:
            raise ValidationError(f"mu_s must be non-negative, got {self.mu_s}")


@dataclass(frozen=True)
class TransportConfig:
    """Physical setup of one transport problem.

    ``a_max`` and ``period`` may be left unset for trace-driven simulations,
    which need neither. ``gravity=0`` gives the horizontal problem.
    """

    part_mass: float
    normal_force: float
    gravity: float = STANDARD_GRAVITY
    a_max: float | None = None
    period: float | None = None
    dual_surface: bool = False

    def __post_init__(self):
        checks = {"part_mass": self.part_mass, "normal_force": self.normal_force,
                  "a_max": self.a_max, "period": self.period}
        for name, value in checks.items():
            if value is None and name in ("a_max", "period"):
                continue
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive and finite, got {value}")
        if not (math.isfinite(self.gravity) and self.gravity >= 0):
            raise ValidationError(f"gravity must be non-negative, got {self.gravity}")

    @classmethod
    def from_nondimensional(cls, f_n, alpha, *, part_mass=0.009, gravity=STANDARD_GRAVITY,
                            period=0.05, dual_surface=False) -> "TransportConfig":
        """Build a config from the normal force per weight and ``a_max / g``."""
        m_eff = part_mass / 2 if dual_surface else part_mass
        return cls(part_mass=part_mass, normal_force=f_n * m_eff * gravity,
                   gravity=gravity, a_max=alpha * gravity, period=period,
                   dual_surface=dual_surface)

    @property
    def effective_mass(self) -> float:
        return self.part_mass / 2 if self.dual_surface else self.part_mass

    @property
    def f_n(self) -> float:
        return self.normal_force / (self.effective_mass * self.gravity)

    @property
    def alpha(self) -> float:
        if self.a_max is None:
            raise ValidationError("a_max is not set")
        return self.a_max / self.gravity

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ValidationError(f"TransportConfig.{name} is required here")


@dataclass(frozen=True)
class SystemState:
    t: float
    z_s: float
    v_s: float
    z_p: float
    v_p: float
    mode: ContactMode = ContactMode.STICKING

    def check(self):
        values = (self.t, self.z_s, self.v_s, self.z_p, self.v_p)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"non-finite state: {self}")
        return self

    @classmethod
    def at_rest_on(cls, t, z_s, v_s, z_p=None) -> "SystemState":
        """Part stuck to the surface."""
        return cls(t=t, z_s=z_s, v_s=v_s, z_p=z_s if z_p is None else z_p,
                   v_p=v_s, mode=ContactMode.STICKING)


@dataclass
class Trajectory:
    """Sampled simulation output.

    ``a_s`` and ``mode`` at a sample are the values in force on the interval
    that starts at that sample.
    """

    t: np.ndarray
    z_s: np.ndarray
    v_s: np.ndarray
    a_s: np.ndarray
    z_p: np.ndarray
    v_p: np.ndarray
    mode: np.ndarray
    config: TransportConfig | None = None
    friction: FrictionPair | None = None
    waveform: str = ""
    period: float | None = None

    COLUMNS = ("t", "z_S", "v_S", "a_S", "z_P", "v_P", "mode")

    def __len__(self):
        return len(self.t)

    def state(self, i) -> SystemState:
        return SystemState(float(self.t[i]), float(self.z_s[i]), float(self.v_s[i]),
                           float(self.z_p[i]), float(self.v_p[i]),
                           ContactMode(int(self.mode[i])))

    def states(self) -> Iterator[SystemState]:
        for i in range(len(self)):
            yield self.state(i)

    @property
    def final(self) -> SystemState:
        return self.state(len(self) - 1)

    def mode_fractions(self) -> dict[str, float]:
        """Fraction of elapsed time spent in each contact mode."""
        dt = np.diff(self.t)
        total = dt.sum()
        out = {}
        for mode in ContactMode:
            share = dt[self.mode[:-1] == mode].sum()
            out[mode.label] = float(share / total) if total > 0 else 0.0
        return out

    def to_csv(self, path_or_file):
        """Write one row per sample with a header row, SI units."""
        if hasattr(path_or_file, "write"):
            self._write_csv(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write_csv(fh)

    def _write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(self.COLUMNS)
        labels = [ContactMode(int(m)).label for m in self.mode]
        cols = (self.t, self.z_s, self.v_s, self.a_s, self.z_p, self.v_p)
        for i in range(len(self)):
            writer.writerow([repr(float(c[i])) for c in cols] + [labels[i]])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != cls.COLUMNS:
                raise ValidationError(f"{path}: expected header {','.join(cls.COLUMNS)}")
            rows = [row for row in reader if row]
        try:
            data = np.array([[float(x) for x in row[:6]] for row in rows])
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
        modes = np.array([ContactMode.from_label(row[6].strip()) for row in rows], dtype=np.int8)
        return cls(*data.T, mode=modes)


def friction_force(state: SystemState, surface_accel: float, fric: FrictionPair,
                   cfg: TransportConfig) -> float:
    """Friction force on the part (N, positive up).

    While sticking inside the static cone this is the force that keeps the part
    on the surface. At slip onset it is ``mu_k F_n sgn(a_S + g)``, and during
    slipping ``mu_k F_n sgn(v_S - v_P)``.
    """
    m = cfg.effective_mass
    if state.mode == ContactMode.STICKING:
        required = m * (surface_accel + cfg.gravity)
        if abs(required) <= fric.mu_s * cfg.normal_force:
            return required
        return math.copysign(fric.mu_k * cfg.normal_force, surface_accel + cfg.gravity)
    direction = np.sign(state.v_s - state.v_p)
    if direction == 0:
        direction = -1.0 if state.mode == ContactMode.SLIPPING_UP else 1.0
    return float(direction * fric.mu_k * cfg.normal_force)


def _tolerances(dt):
    return STICK_VELOCITY_TOL, STICK_FORCE_TOL, dt * EVENT_TIME_FRACTION


def _run(knots, accels, fric, cfg, state, dt, v_bound):
    """Call the compiled integrator; returns the raw sample block and status."""
    eps_v, eps_f, eps_t = _tolerances(dt)
    out = _kernel.allocate(len(knots))
    n, status = _kernel.integrate(
        np.ascontiguousarray(knots, dtype=float), np.ascontiguousarray(accels, dtype=float),
        cfg.effective_mass, cfg.gravity, fric.mu_s * cfg.normal_force,
        fric.mu_k * cfg.normal_force, state.z_s, state.v_s, state.z_p, state.v_p,
        int(state.mode), eps_v, eps_f, eps_t, v_bound, out)
    return out[:n], status


def _merge_knots(grid, breaks, eps):
    """Union of the output grid and the waveform breakpoints.

    Breakpoints closer than ``eps`` to a grid time are dropped. Returns the
    knots and a mask marking grid members.
    """
    if len(breaks):
        idx = np.searchsorted(grid, breaks)
        lo = np.abs(breaks - grid[np.clip(idx - 1, 0, len(grid) - 1)])
        hi = np.abs(breaks - grid[np.clip(idx, 0, len(grid) - 1)])
        breaks = breaks[np.minimum(lo, hi) > eps]
    knots = np.concatenate([grid, breaks])
    is_grid = np.concatenate([np.ones(len(grid), bool), np.zeros(len(breaks), bool)])
    order = np.argsort(knots, kind="stable")
    return knots[order], is_grid[order]


def _waveform_pieces(waveform, grid, eps):
    knots, is_grid = _merge_knots(grid, waveform.breakpoints(grid[0], grid[-1]), eps)
    mids = 0.5 * (knots[:-1] + knots[1:])
    # the trailing value is the drive just after the last knot, for its mode label
    probe = np.concatenate([mids, [knots[-1] + 0.5 * eps]])
    return knots, is_grid, waveform.acceleration(probe)


def _initial_state(waveform, t0, initial):
    if initial is None:
        return SystemState.at_rest_on(t0, float(waveform.position(t0)),
                                      float(waveform.velocity(t0)))
    initial.check()
    if initial.mode == ContactMode.STICKING and abs(initial.v_p - initial.v_s) > STICK_VELOCITY_TOL:
        raise ValidationError("initial state is marked Sticking but v_P != v_S")
    return initial


def _default_v_bound(cfg, surface_speed):
    scale = max(surface_speed, (cfg.a_max or 0.0) * (cfg.period or 0.0), 1e-3)
    return 1e3 * scale


def step(state: SystemState, waveform, fric: FrictionPair, cfg: TransportConfig,
         dt: float) -> SystemState:
    """Advance one step of length ``dt`` along ``waveform``.

    Mode switches inside the step are resolved exactly: the static cone is
    re-tested at every change of surface acceleration, and velocity
    crossings while slipping are located by bisection.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError(f"dt must be positive, got {dt}")
    state = SystemState.check(state)
    grid = np.array([state.t, state.t + dt])
    knots, _, accels = _waveform_pieces(waveform, grid, dt * EVENT_TIME_FRACTION)
    rows, _ = _run(knots, accels, fric, cfg, state, dt, math.inf)
    last = rows[-1]
    return SystemState(float(last[0]), float(last[1]), float(last[2]),
                       float(last[4]), float(last[5]), ContactMode(int(last[6])))


def _trajectory(rows, mask, **meta):
    rows = rows[mask[:len(rows)]]
    return Trajectory(t=rows[:, 0].copy(), z_s=rows[:, 1].copy(), v_s=rows[:, 2].copy(),
                      a_s=rows[:, 3].copy(), z_p=rows[:, 4].copy(), v_p=rows[:, 5].copy(),
                      mode=rows[:, 6].astype(np.int8), **meta)


def simulate(waveform, fric: FrictionPair, cfg: TransportConfig, n_periods: int,
             initial: SystemState | None = None, *, steps_per_period: int = STEPS_PER_PERIOD,
             v_bound: float | None = None) -> Trajectory:
    """Simulate ``n_periods`` drive periods.

    Parameters
    ----------
    waveform : Waveform
        Surface acceleration profile; its period must match ``cfg.period``
        when the latter is set.
    initial : SystemState, optional
        Defaults to the part stuck to the surface at ``t = 0``.
    steps_per_period : int
        Output samples per period. The integration itself is exact between
        samples, so this only sets the output resolution and the event
        tolerance.
    v_bound : float, optional
        Divergence threshold on ``|v_P|``; defaults to a thousand times the
        surface velocity scale.

    Raises
    ------
    DivergenceError
        When ``|v_P|`` exceeds ``v_bound``; the partial trajectory is attached.
    """
    if n_periods < 1:
        raise ValidationError("n_periods must be >= 1")
    period = waveform.period
    if cfg.period is not None and not math.isclose(cfg.period, period, rel_tol=1e-9):
        raise ValidationError(f"waveform period {period} != config period {cfg.period}")
    state = _initial_state(waveform, 0.0, initial)
    dt = period / steps_per_period
    n = int(n_periods) * steps_per_period
    grid = state.t + dt * np.arange(n + 1)
    knots, is_grid, accels = _waveform_pieces(waveform, grid, dt * EVENT_TIME_FRACTION)
    if v_bound is None:
        v_bound = _default_v_bound(cfg, waveform.max_speed())
    rows, status = _run(knots, accels, fric, cfg, state, dt, v_bound)
    traj = _trajectory(rows, is_grid, config=cfg, friction=fric,
                       waveform=getattr(waveform, "name", ""), period=period)
    if status == _kernel.DIVERGED:
        raise DivergenceError(
            f"|v_P| exceeded {v_bound:.3g} m/s at t={rows[-1, 0]:.6g} s; "
            "the normal force cannot arrest downward slipping", trajectory=traj)
    return traj


def simulate_from_surface_trace(times, surface_velocity, fric: FrictionPair,
                                cfg: TransportConfig, initial: SystemState | None = None,
                                *, v_bound: float | None = None) -> Trajectory:
    """Simulate the part against a sampled surface velocity.

    The surface velocity is interpolated linearly between samples, so the
    surface acceleration is constant on each sample interval. Output samples
    coincide with the input samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(surface_velocity, dtype=float)
    if t.ndim != 1 or t.shape != v.shape:
        raise ValidationError("times and surface_velocity must be 1-D and equal length")
    if len(t) < 2:
        raise ValidationError("need at least 2 surface samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ValidationError("surface trace contains non-finite samples")
    dts = np.diff(t)
    dt = float(dts.mean())
    if dt <= 0 or np.max(np.abs(dts - dt)) > 1e-6 * dt:
        raise ValidationError("surface samples must be uniformly spaced in time")
    if initial is None:
        initial = SystemState.at_rest_on(t[0], 0.0, v[0])
    initial = SystemState.check(initial)
    if not (math.isclose(initial.t, t[0], abs_tol=1e-9 * dt) and
            math.isclose(initial.v_s, v[0], rel_tol=1e-9, abs_tol=STICK_VELOCITY_TOL)):
        raise ValidationError("initial state must sit at the first trace sample")
    accels = np.diff(v) / dts
    if v_bound is None:
        v_bound = _default_v_bound(cfg, float(np.max(np.abs(v))))
    rows, status = _run(t, accels, fric, cfg, initial, dt, v_bound)
    traj = _trajectory(rows, np.ones(len(t), bool), config=cfg, friction=fric,
                       waveform="trace", period=cfg.period)
    if status == _kernel.DIVERGED:
        raise DivergenceError(f"|v_P| exceeded {v_bound:.3g} m/s", trajectory=traj)
    return traj


def net_slip(traj: Trajectory, t_start: float, t_end: float) -> float:
    """Integral of ``v_P - v_S`` over ``[t_start, t_end]`` (trapezoidal)."""
    if not t_end > t_start:
        raise ValidationError("empty window")
    if t_start < traj.t[0] - 1e-12 or t_end > traj.t[-1] + 1e-12:
        raise ValidationError("window outside trajectory span")
    rel = traj.v_p - traj.v_s
    inside = (traj.t > t_start) & (traj.t < t_end)
    ts = np.concatenate([[t_start], traj.t[inside], [t_end]])
    rs = np.concatenate([[np.interp(t_start, traj.t, rel)], rel[inside],
                         [np.interp(t_end, traj.t, rel)]])
    return float(np.sum(0.5 * (rs[1:] + rs[:-1]) * np.diff(ts)))


def period_displacements(traj: Trajectory, period: float | None = None) -> np.ndarray:
    """Part displacement over each complete period of the trajectory."""
    period = period or traj.period
    if period is None:
        raise ValidationError("trajectory has no period")
    n = int(math.floor((traj.t[-1] - traj.t[0]) / period * (1 + 1e-12)))
    bounds = traj.t[0] + period * np.arange(n + 1)
    z = np.interp(bounds, traj.t, traj.z_p)
    return np.diff(z)


def steady_state_velocity(traj: Trajectory, *, warmup: int = 10, window: int = 3,
                          rtol: float = 1e-3, atol: float | None = None) -> float:
    """Average part velocity once the motion is periodic.

    The first ``warmup`` periods are discarded; the last ``window`` periods
    must agree in displacement to ``rtol`` (relative to their magnitude) plus
    ``atol``. Their mean displacement divided by the period is returned.

    Raises
    ------
    NotConvergedError
        If the final periods have not settled.
    """
    d = period_displacements(traj)
    if len(d) < warmup + window:
        raise ValidationError(
            f"need at least {warmup + window} periods, trajectory has {len(d)}")
    tail = d[-window:]
    if atol is None:
        atol = 1e-9 * max(float(np.ptp(traj.z_s)), 1e-12)
    spread = float(np.max(np.abs(np.diff(tail)))) if window > 1 else 0.0
    if spread > rtol * float(np.max(np.abs(tail))) + atol:
        raise NotConvergedError(
            f"per-period displacement still varies by {spread:.3g} m", displacements=d)
    return float(tail.mean() / traj.period)


def horizontal_equivalent(fric: FrictionPair, cfg: TransportConfig):
    """Zero-gravity problem with the fictitious coefficients.

    Returns ``(friction, config)`` such that, as long as the part never slips
    down, the part motion matches the vertical problem. The normal force is
    set equal to the part weight.
    """
    f_n = cfg.f_n
    tilde = FrictionPair(fric.mu_s * f_n - 1, fric.mu_k * f_n + 1, check_order=False)
    flat = replace(cfg, normal_force=cfg.effective_mass * cfg.gravity, gravity=0.0)
    return tilde, flat
