"""Calibrate kinetic friction and normal force from tracked motion traces.

The surface velocity is obtained by finite differences of the tracked
surface position and replayed through the stick-slip model. The simulated
part position is compared against the tracked one, and a particle swarm
searches for the kinetic coefficient (shared by all trials) and the normal
force of each trial that minimise the summed mean position error.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import (STANDARD_GRAVITY, FrictionPair, SystemState, Trajectory,
                       TransportConfig, _run)
from . import _kernel
from .errors import DivergenceError, ValidationError
from .swarm import particle_swarm

UNIT_SCALE = {"m": 1.0, "mm": 1e-3}
DEFAULT_SMOOTH = 5
#: replay sub-steps per sample; a finer surface acceleration lets slip onset
#: move continuously with the normal force instead of snapping to samples
DEFAULT_UPSAMPLE = 8


@dataclass
class ExperimentTrace:
    """Tracked positions of one trial, in metres, sampled at ``rate`` Hz."""

    rate: float
    z_surface: np.ndarray
    z_part: np.ndarray
    z_plate: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValidationError(f"rate must be positive, got {self.rate}")
        self.z_surface = np.asarray(self.z_surface, dtype=float)
        self.z_part = np.asarray(self.z_part, dtype=float)
        series = {"z_surface": self.z_surface, "z_part": self.z_part}
        if self.z_plate is not None:
            self.z_plate = np.asarray(self.z_plate, dtype=float)
            series["z_plate"] = self.z_plate
        n = len(self.z_surface)
        for col, values in series.items():
            if values.ndim != 1:
                raise ValidationError(f"{col} must be 1-D")
            if len(values) != n:
                raise ValidationError(f"column {col!r} has {len(values)} samples, expected {n}")
            if not np.all(np.isfinite(values)):
                raise ValidationError(f"column {col!r} contains non-finite values")
        if n < 10:
            raise ValidationError(f"trace needs at least 10 samples, got {n}")

    def __len__(self):
        return len(self.z_surface)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.rate

    @property
    def duration(self) -> float:
        return len(self) / self.rate


def load_trace(path, delimiter: str | None = None) -> ExperimentTrace:
    """Read a delimited trace file.

    Layout: optional ``# key: value`` comment lines (``units`` is ``m`` or
    ``mm``; other keys become metadata), a header ``t, z_surface, z_part``
    with optional ``z_plate``, then one row per sample with a uniform
    timestep.
    """
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    body = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition(":")
            if not sep:
                key, sep, value = stripped.lstrip("#").partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        body.append(line)
    if not body:
        raise ValidationError(f"{path}: missing header")
    if delimiter is None:
        delimiter = "," if "," in body[0] else ("\t" if "\t" in body[0] else None)
    if delimiter is None:
        rows = [ln.split() for ln in body]
    else:
        rows = list(csv.reader(body, delimiter=delimiter))
    header = [h.strip() for h in rows[0]]
    required = ["t", "z_surface", "z_part"]
    if header[:3] != required or len(header) > 4 or (len(header) == 4 and header[3] != "z_plate"):
        raise ValidationError(
            f"{path}: missing header, expected {','.join(required)}[,z_plate], got {','.join(header)}")

    columns = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        for j, h in enumerate(header):
            cell = row[j].strip() if j < len(row) else ""
            if cell == "":
                continue
            try:
                columns[h].append(float(cell))
            except ValueError:
                raise ValidationError(
                    f"{path}: line {lineno}: column {h!r}: cannot parse {cell!r}") from None
    n = len(columns["t"])
    for h in header:
        if len(columns[h]) != n:
            raise ValidationError(
                f"{path}: column {h!r} has {len(columns[h])} values, column 't' has {n}")
        if not np.all(np.isfinite(columns[h])):
            raise ValidationError(f"{path}: column {h!r} contains non-finite values")

    units = meta.pop("units", "m")
    if units not in UNIT_SCALE:
        raise ValidationError(f"{path}: units must be one of {sorted(UNIT_SCALE)}, got {units!r}")
    scale = UNIT_SCALE[units]
    t = np.asarray(columns["t"])
    if n < 10:
        raise ValidationError(f"{path}: need at least 10 samples, got {n}")
    dts = np.diff(t)
    dt = float(dts.mean())
    if dt <= 0 or np.max(np.abs(dts - dt)) > 1e-3 * dt:
        raise ValidationError(f"{path}: timestep is not uniform")
    plate = np.asarray(columns["z_plate"]) * scale if "z_plate" in columns else None
    return ExperimentTrace(rate=1.0 / dt, z_surface=np.asarray(columns["z_surface"]) * scale,
                           z_part=np.asarray(columns["z_part"]) * scale, z_plate=plate,
                           metadata=meta, name=str(path))


def save_trace(trace: ExperimentTrace, path, units: str = "m"):
    scale = 1.0 / UNIT_SCALE[units]
    header = ["t", "z_surface", "z_part"] + (["z_plate"] if trace.z_plate is not None else [])
    with open(path, "w", newline="") as fh:
        fh.write(f"# units: {units}\n")
        for key, value in sorted(trace.metadata.items()):
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        cols = [trace.times, trace.z_surface * scale, trace.z_part * scale]
        if trace.z_plate is not None:
            cols.append(trace.z_plate * scale)
        for row in zip(*cols):
            writer.writerow([repr(float(x)) for x in row])


def moving_average(x, width: int) -> np.ndarray:
    """Centred moving average whose window shrinks symmetrically at the ends.

    Linear series pass through unchanged.
    """
    x = np.asarray(x, dtype=float)
    if width <= 1:
        return x.copy()
    n = len(x)
    half = np.minimum(width // 2, np.minimum(np.arange(n), n - 1 - np.arange(n)))
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    return (csum[idx + half + 1] - csum[idx - half]) / (2 * half + 1)


def finite_difference_velocity(positions, rate: float, smooth: int = 1) -> np.ndarray:
    """Velocity by central differences, one-sided at the two ends.

    ``smooth > 1`` applies :func:`moving_average` of that width first.
    """
    z = np.asarray(positions, dtype=float)
    if z.ndim != 1 or len(z) < 3:
        raise ValidationError("need at least 3 position samples")
    if smooth > 1:
        z = moving_average(z, smooth)
    return np.gradient(z, 1.0 / rate)


@dataclass
class _Prepared:
    """Per-trace quantities that do not depend on the fit parameters."""

    trace: ExperimentTrace
    t: np.ndarray  # replay knots, ``stride`` per sample interval
    v_s: np.ndarray  # surface velocity at the knots
    a_s: np.ndarray  # continuous surface acceleration at the knots
    velocity: CubicSpline
    stride: int
    z_s0: float
    penalty: float


def _prepare(trace: ExperimentTrace, smooth: int, upsample: int = DEFAULT_UPSAMPLE) -> _Prepared:
    if upsample < 1:
        raise ValidationError(f"upsample must be >= 1, got {upsample}")
    v = finite_difference_velocity(trace.z_surface, trace.rate, smooth)
    t = trace.times
    spline = CubicSpline(t, v)
    fine = np.arange((len(t) - 1) * upsample + 1) / (trace.rate * upsample)
    fine[-1] = t[-1]
    amplitude = max(float(np.ptp(trace.z_part)), 1e-9)
    return _Prepared(trace, fine, spline(fine), spline(fine, 1), spline, upsample,
                     float(trace.z_surface[0]), 1e3 * len(trace) * amplitude)


def _threshold_knots(prep: _Prepared, limits):
    """Replay knots refined where the surface acceleration crosses ``limits``.

    The replay holds the acceleration constant between knots, so without the
    extra knots slip onset could only happen on the knot grid and the cost
    would move in steps as the normal force changes. Returns the knots, the
    piece accelerations and a mask of the original knots.
    """
    t, a = prep.t, prep.a_s
    extra = []
    for limit in limits:
        d = a - limit
        j = np.flatnonzero(d[:-1] * d[1:] < 0)
        frac = d[j] / (d[j] - d[j + 1])
        keep = (frac > 1e-6) & (frac < 1 - 1e-6)
        extra.append(t[j[keep]] + frac[keep] * (t[j[keep] + 1] - t[j[keep]]))
    extra = np.sort(np.concatenate(extra))
    if not len(extra):
        return t, np.diff(prep.v_s) / np.diff(t), np.ones(len(t), bool)
    pos = np.searchsorted(t, extra)
    knots = np.insert(t, pos, extra)
    v = np.insert(prep.v_s, pos, prep.velocity(extra))
    orig = np.insert(np.ones(len(t), bool), pos, False)
    return knots, np.diff(v) / np.diff(knots), orig


def _replay(prep: _Prepared, mu_k, normal_force, mu_s, part_mass, gravity):
    cfg = TransportConfig(part_mass=part_mass, normal_force=normal_force, gravity=gravity)
    fric = FrictionPair(mu_s, mu_k)
    hold = mu_s * normal_force / cfg.effective_mass
    knots, accels, orig = _threshold_knots(prep, (hold - gravity, -hold - gravity))
    state = SystemState.at_rest_on(prep.t[0], prep.z_s0, float(prep.v_s[0]))
    v_bound = 1e3 * max(float(np.max(np.abs(prep.v_s))), 1e-3)
    dt = 1.0 / (prep.trace.rate * prep.stride)
    rows, status = _run(knots, accels, fric, cfg, state, dt, v_bound)
    rows = rows[orig[:len(rows)]][::prep.stride]
    return rows, status, cfg, fric


def _part_offset(z_part, z_model) -> float:
    # The dynamics do not depend on absolute height, so the unknown initial
    # part position enters as a constant shift; the median minimises the mean
    # absolute error over it.
    return float(np.median(z_part - z_model))


def _simulate_prepared(prep: _Prepared, mu_k, normal_force, mu_s, part_mass, gravity,
                       align: bool = True):
    """Simulated part positions at the trace samples, or ``None`` if the part ran away.

    The part starts stuck to the surface; with ``align`` the whole curve is
    then shifted by the best constant offset against the tracked part.
    """
    rows, status, _, _ = _replay(prep, mu_k, normal_force, mu_s, part_mass, gravity)
    if status == _kernel.DIVERGED:
        return None
    z = rows[:, 4]
    if align:
        z = z + _part_offset(prep.trace.z_part, z)
    return z


def _error_prepared(prep, mu_k, normal_force, mu_s, part_mass, gravity):
    z = _simulate_prepared(prep, mu_k, normal_force, mu_s, part_mass, gravity)
    if z is None:
        return prep.penalty
    return float(np.mean(np.abs(z - prep.trace.z_part)))


def trial_error(trace: ExperimentTrace, mu_k: float, normal_force: float, *, mu_s: float,
                part_mass: float, gravity: float = STANDARD_GRAVITY,
                smooth: int = DEFAULT_SMOOTH, upsample: int = DEFAULT_UPSAMPLE) -> float:
    """Mean absolute part-position error (m) of the model against one trace.

    The surface velocity is differentiated from the tracked positions after a
    ``smooth``-sample moving average, then spline-interpolated onto
    ``upsample`` sub-steps per sample before replay. A run-away simulation
    costs ``1e3 * len(trace) * ptp(z_part)`` instead of raising, so optimisers
    always see a finite value.
    """
    prep = _prepare(trace, smooth, upsample)
    return _error_prepared(prep, mu_k, normal_force, mu_s, part_mass, gravity)


def simulate_trace(trace: ExperimentTrace, mu_k: float, normal_force: float, *, mu_s: float,
                   part_mass: float, gravity: float = STANDARD_GRAVITY,
                   smooth: int = DEFAULT_SMOOTH, upsample: int = DEFAULT_UPSAMPLE) -> Trajectory:
    """Model trajectory for one trace, sampled at the trace times.

    Raises :class:`DivergenceError` if the part runs away.
    """
    prep = _prepare(trace, smooth, upsample)
    rows, status, cfg, fric = _replay(prep, mu_k, normal_force, mu_s, part_mass, gravity)
    if status != _kernel.DIVERGED:
        rows[:, 4] += _part_offset(trace.z_part, rows[:, 4])
    traj = Trajectory(t=rows[:, 0].copy(), z_s=rows[:, 1].copy(), v_s=rows[:, 2].copy(),
                      a_s=rows[:, 3].copy(), z_p=rows[:, 4].copy(), v_p=rows[:, 5].copy(),
                      mode=rows[:, 6].astype(np.int8), config=cfg, friction=fric,
                      waveform="trace")
    if status == _kernel.DIVERGED:
        raise DivergenceError("part ran away while replaying the trace", trajectory=traj)
    return traj


def synthesize_trace(z_surface, rate: float, mu_k: float, normal_force: float, *, mu_s: float,
                     part_mass: float, gravity: float = STANDARD_GRAVITY,
                     smooth: int = DEFAULT_SMOOTH, upsample: int = DEFAULT_UPSAMPLE,
                     noise: float = 0.0, rng=None,
                     metadata: dict | None = None) -> ExperimentTrace:
    """Trace whose part motion is generated by the model itself.

    ``noise`` is the standard deviation of Gaussian noise added to the part
    positions, as a fraction of the part's displacement range.
    """
    z_surface = np.asarray(z_surface, dtype=float)
    placeholder = ExperimentTrace(rate, z_surface, z_surface.copy())
    prep = _prepare(placeholder, smooth, upsample)
    z = _simulate_prepared(prep, mu_k, normal_force, mu_s, part_mass, gravity, align=False)
    if z is None:
        raise ValidationError("model diverged while synthesising the trace")
    z_part = z.copy()
    if noise:
        rng = np.random.default_rng(rng)
        z_part = z_part + rng.normal(0.0, noise * float(np.ptp(z)), size=len(z))
    meta = {"mu_k": mu_k, "normal_force": normal_force, "mu_s": mu_s, "part_mass": part_mass}
    meta.update(metadata or {})
    return ExperimentTrace(rate, z_surface, z_part, metadata=meta)


@dataclass
class FitResult:
    mu_k: float
    normal_forces: np.ndarray
    trial_errors: np.ndarray
    normalized_errors: np.ndarray
    cost: float
    iterations: int
    history: list
    stalled: bool
    mu_k_profile: list
    mu_k_flat: bool
    mu_k_spread: float
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mu_k": self.mu_k,
            "normal_forces": [float(x) for x in self.normal_forces],
            "trial_errors": [float(x) for x in self.trial_errors],
            "normalized_errors": [float(x) for x in self.normalized_errors],
            "mean_error": float(np.mean(self.trial_errors)),
            "mean_normalized_error": float(np.mean(self.normalized_errors)),
            "cost": self.cost,
            "diagnostics": {
                "iterations": self.iterations,
                "stalled": self.stalled,
                "best_cost_history": [float(c) for c in self.history],
                "mu_k_profile": self.mu_k_profile,
                "mu_k_flat": self.mu_k_flat,
                "mu_k_spread": self.mu_k_spread,
            },
            "settings": self.settings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _per_trial_bounds(bounds, n):
    arr = np.asarray(bounds, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (n, 1))
    if arr.shape != (n, 2):
        raise ValidationError(f"normal force bounds must be one (lo, hi) pair or {n} pairs")
    return arr


def fit(traces, *, mu_s: float, part_mass: float, mu_k_bounds=(0.1, None),
        normal_force_bounds=(0.01, 5.0), gravity: float = STANDARD_GRAVITY, seed: int = 0,
        smooth: int = DEFAULT_SMOOTH, n_particles: int = 60, max_iter: int = 200,
        stall_iter: int = 30, inertia: float = 0.729, cognitive: float = 1.494,
        social: float = 1.494, restarts: int = 3,
        upsample: int = DEFAULT_UPSAMPLE) -> FitResult:
    """Fit one kinetic coefficient and one normal force per trace.

    Parameters
    ----------
    traces : list of ExperimentTrace
    mu_s : float
        Measured static coefficient; held fixed.
    mu_k_bounds : (lo, hi)
        ``hi=None`` means ``mu_s``. ``hi`` may not exceed ``mu_s``.
    normal_force_bounds : (lo, hi) or list of per-trace pairs, in newtons.
    seed : int
        The result is a deterministic function of the inputs and the seed.
    restarts : int
        Independent swarms, each seeded from ``seed``; the best one wins.

    Returns
    -------
    FitResult
        ``mu_k_flat`` is set when the total cost hardly changes along
        ``mu_k`` at the optimum, i.e. the traces never slip enough to pin it.
        ``mu_k_spread`` is the standard deviation of ``mu_k`` across restarts.
    """
    traces = list(traces)
    if not traces:
        raise ValidationError("need at least one trace")
    lo_k, hi_k = mu_k_bounds
    hi_k = mu_s if hi_k is None else hi_k
    if not 0 < lo_k < hi_k <= mu_s:
        raise ValidationError(f"mu_k bounds must satisfy 0 < lo < hi <= mu_s, got ({lo_k}, {hi_k})")
    fb = _per_trial_bounds(normal_force_bounds, len(traces))
    if np.any(fb[:, 0] <= 0) or np.any(fb[:, 1] <= fb[:, 0]):
        raise ValidationError("normal force bounds must satisfy 0 < lo < hi")

    preps = [_prepare(tr, smooth, upsample) for tr in traces]

    def total(x):
        return sum(_error_prepared(p, x[0], x[i + 1], mu_s, part_mass, gravity)
                   for i, p in enumerate(preps))

    lower = np.concatenate([[lo_k], fb[:, 0]])
    upper = np.concatenate([[hi_k], fb[:, 1]])
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    runs = [particle_swarm(total, lower, upper, n_particles=n_particles, inertia=inertia,
                           cognitive=cognitive, social=social, max_iter=max_iter,
                           stall_iter=stall_iter, seed=ss)
            for ss in np.random.SeedSequence(seed).spawn(restarts)]
    res = min(runs, key=lambda r: r.cost)
    if not math.isfinite(res.cost):
        raise ValidationError("optimiser ended on a non-finite cost")

    mu_k, forces = float(res.x[0]), res.x[1:].copy()
    errors = np.array([_error_prepared(p, mu_k, f, mu_s, part_mass, gravity)
                       for p, f in zip(preps, forces)])
    scale = np.array([max(float(np.max(np.abs(tr.z_part - tr.z_part[0]))), 1e-12)
                      for tr in traces])

    grid = np.linspace(lo_k, hi_k, 11)
    profile = [total(np.concatenate([[m], forces])) for m in grid]
    flat = (max(profile) - min(profile)) <= 1e-3 * res.cost + 1e-12 * float(np.mean(scale))
    spread = float(np.std([r.x[0] for r in runs]))

    settings = {"mu_s": mu_s, "part_mass": part_mass, "gravity": gravity, "seed": seed,
                "smooth": smooth, "upsample": upsample, "mu_k_bounds": [lo_k, hi_k],
                "normal_force_bounds": fb.tolist(), "n_particles": n_particles,
                "max_iter": max_iter, "stall_iter": stall_iter, "inertia": inertia,
                "cognitive": cognitive, "social": social, "restarts": restarts,
                "traces": [tr.name for tr in traces]}
    return FitResult(mu_k=mu_k, normal_forces=forces, trial_errors=errors,
                     normalized_errors=errors / scale, cost=res.cost,
                     iterations=sum(r.iterations for r in runs), history=res.history, stalled=res.stalled,
                     mu_k_profile=[[float(m), float(c)] for m, c in zip(grid, profile)],
                     mu_k_flat=bool(flat), mu_k_spread=spread, settings=settings)


def check_traces(X) -> list:
    """Validate estimator input: a non-empty sequence of traces."""
    if isinstance(X, ExperimentTrace):
        X = [X]
    X = list(X)
    if not X:
        raise ValidationError("need at least one trace")
    for tr in X:
        if not isinstance(tr, ExperimentTrace):
            raise ValidationError(f"expected ExperimentTrace, got {type(tr).__name__}")
    return X


class FrictionEstimator(BaseEstimator):
    """Estimator wrapper around :func:`fit`.

    ``fit(X)`` takes a list of traces and stores ``mu_k_``, ``normal_forces_``
    and ``result_``. ``predict(X)`` returns the simulated part positions for
    each trace, using the fitted normal forces unless others are given.
    """

    def __init__(self, mu_s=0.72, part_mass=0.009, gravity=STANDARD_GRAVITY,
                 mu_k_bounds=(0.1, None), normal_force_bounds=(0.01, 5.0),
                 smooth=DEFAULT_SMOOTH, upsample=DEFAULT_UPSAMPLE, n_particles=60,
                 max_iter=200, stall_iter=30, restarts=3, random_state=0):
        self.mu_s = mu_s
        self.part_mass = part_mass
        self.gravity = gravity
        self.mu_k_bounds = mu_k_bounds
        self.normal_force_bounds = normal_force_bounds
        self.smooth = smooth
        self.upsample = upsample
        self.n_particles = n_particles
        self.max_iter = max_iter
        self.stall_iter = stall_iter
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_traces(X)
        self.result_ = fit(X, mu_s=self.mu_s, part_mass=self.part_mass,
                           mu_k_bounds=self.mu_k_bounds,
                           normal_force_bounds=self.normal_force_bounds,
                           gravity=self.gravity, seed=self.random_state, smooth=self.smooth,
                           upsample=self.upsample, n_particles=self.n_particles,
                           max_iter=self.max_iter, stall_iter=self.stall_iter,
                           restarts=self.restarts)
        self.mu_k_ = self.result_.mu_k
        self.normal_forces_ = self.result_.normal_forces
        return self

    def _forces(self, X, normal_forces):
        if normal_forces is None:
            normal_forces = self.normal_forces_
        normal_forces = np.atleast_1d(np.asarray(normal_forces, dtype=float))
        if len(normal_forces) == 1:
            normal_forces = np.repeat(normal_forces, len(X))
        if len(normal_forces) != len(X):
            raise ValidationError("one normal force per trace is required")
        return normal_forces

    def predict(self, X, normal_forces=None):
        check_is_fitted(self, "mu_k_")
        X = check_traces(X)
        out = []
        for tr, f in zip(X, self._forces(X, normal_forces)):
            z = _simulate_prepared(_prepare(tr, self.smooth, self.upsample), self.mu_k_, f, self.mu_s,
                                   self.part_mass, self.gravity)
            out.append(np.full(len(tr), np.nan) if z is None else z)
        return out

    def score(self, X, y=None, normal_forces=None):
        """Negative mean position error over the traces (higher is better)."""
        check_is_fitted(self, "mu_k_")
        X = check_traces(X)
        errs = [_error_prepared(_prepare(tr, self.smooth, self.upsample), self.mu_k_, f, self.mu_s,
                                self.part_mass, self.gravity)
                for tr, f in zip(X, self._forces(X, normal_forces))]
        return -float(np.mean(errs))
