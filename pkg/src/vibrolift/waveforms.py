"""Periodic piecewise-constant surface acceleration profiles."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FrictionPair, TransportConfig
from .errors import InfeasibleError, ValidationError


@dataclass(frozen=True)
class Waveform:
    """Surface acceleration that is constant on each segment of one period.

    Velocity and position are integrated analytically. The velocity constant
    makes the mean velocity zero and the position constant makes the mean
    position zero, so both are periodic when the accelerations integrate to
    zero over the period. Time is taken modulo the period, each segment
    being closed on the left and open on the right.

    Raises
    ------
    ValidationError
        If durations do not sum to the period or the net velocity change over
        one period exceeds ``closure_rtol * max|a| * period``.
    """

    period: float
    durations: tuple
    accelerations: tuple
    name: str = "custom"
    closure_rtol: float = 1e-9
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _v0: np.ndarray = field(init=False, repr=False, compare=False)
    _z0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float)
        a = np.asarray(self.accelerations, dtype=float)
        T = float(self.period)
        if not (math.isfinite(T) and T > 0):
            raise ValidationError(f"period must be positive, got {self.period}")
        if d.ndim != 1 or d.shape != a.shape or len(d) == 0:
            raise ValidationError("durations and accelerations must be equal-length sequences")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(a))):
            raise ValidationError("segments must be finite")
        if np.any(d <= 0):
            raise ValidationError("segment durations must be positive")
        if not math.isclose(d.sum(), T, rel_tol=1e-9):
            raise ValidationError(f"segment durations sum to {d.sum()}, period is {T}")
        peak = float(np.max(np.abs(a)))
        closure = float(np.dot(a, d))
        if abs(closure) > self.closure_rtol * peak * T:
            raise ValidationError(
                f"surface velocity is not periodic: net change {closure:.6g} m/s per period")

        starts = np.concatenate([[0.0], np.cumsum(d)[:-1]])
        # velocity / position at segment starts, zero initial constants
        dv = a * d
        u = np.concatenate([[0.0], np.cumsum(dv)[:-1]])
        v_mean = float(np.sum(u * d + 0.5 * a * d**2)) / T
        u = u - v_mean
        dz = u * d + 0.5 * a * d**2
        z = np.concatenate([[0.0], np.cumsum(dz)[:-1]])
        z_mean = float(np.sum(z * d + 0.5 * u * d**2 + a * d**3 / 6.0)) / T
        z = z - z_mean

        object.__setattr__(self, "durations", tuple(float(x) for x in d))
        object.__setattr__(self, "accelerations", tuple(float(x) for x in a))
        object.__setattr__(self, "period", T)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_v0", u)
        object.__setattr__(self, "_z0", z)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        tau = np.mod(t, self.period)
        idx = np.searchsorted(self._starts, tau, side="right") - 1
        idx = np.clip(idx, 0, len(self._starts) - 1)
        return idx, tau - self._starts[idx]

    def acceleration(self, t):
        idx, _ = self._locate(t)
        return np.asarray(self.accelerations)[idx]

    def velocity(self, t):
        idx, s = self._locate(t)
        return self._v0[idx] + np.asarray(self.accelerations)[idx] * s

    def position(self, t):
        idx, s = self._locate(t)
        a = np.asarray(self.accelerations)[idx]
        return self._z0[idx] + self._v0[idx] * s + 0.5 * a * s * s

    def breakpoints(self, t0, t1):
        """Segment boundaries strictly inside ``(t0, t1)``."""
        k0 = math.floor(t0 / self.period)
        k1 = math.ceil(t1 / self.period)
        ks = np.arange(k0, k1 + 1)[:, None] * self.period
        pts = (ks + self._starts[None, :]).ravel()
        return np.sort(pts[(pts > t0) & (pts < t1)])

    @property
    def boundaries(self) -> np.ndarray:
        """Segment start times within one period."""
        return self._starts.copy()

    def max_abs_acceleration(self) -> float:
        return float(np.max(np.abs(self.accelerations)))

    def max_speed(self) -> float:
        ends = self._v0 + np.asarray(self.accelerations) * np.asarray(self.durations)
        return float(max(np.max(np.abs(self._v0)), np.max(np.abs(ends))))

    def net_velocity_change(self) -> float:
        return float(np.dot(self.accelerations, self.durations))

    def check_limit(self, a_max, rtol=1e-12):
        peak = self.max_abs_acceleration()
        if peak > a_max * (1 + rtol):
            raise InfeasibleError(
                f"waveform peak acceleration {peak:.6g} exceeds a_max={a_max:.6g}",
                bound="a_max")
        return self

    def to_dict(self) -> dict:
        return {"name": self.name, "period": self.period,
                "segments": [{"duration": d, "acceleration": a}
                             for d, a in zip(self.durations, self.accelerations)]}

    @classmethod
    def from_dict(cls, data) -> "Waveform":
        try:
            segments = data["segments"]
            return cls(period=float(data["period"]),
                       durations=tuple(float(s["duration"]) for s in segments),
                       accelerations=tuple(float(s["acceleration"]) for s in segments),
                       name=str(data.get("name", "custom")))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed waveform description: {exc}") from None

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path) -> "Waveform":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: {exc}") from None
        return cls.from_dict(data)


def zero_waveform(period) -> Waveform:
    return Waveform(period, (period,), (0.0,), name="zero")


def optimal_switch_fractions(fric: FrictionPair, f_n: float, alpha: float):
    """Switch times ``(T1/T, T2/T)`` of the optimal upward waveform."""
    mu_s, mu_k = fric.mu_s, fric.mu_k
    t1 = (mu_k * f_n + 1) / ((mu_s + mu_k) * f_n)
    t2 = t1 + (alpha + mu_k * f_n + 1) * (mu_s * f_n - 1) / (2 * alpha * (mu_s + mu_k) * f_n)
    return t1, t2


def optimal_waveform(fric: FrictionPair, cfg: TransportConfig, margin: float = 1.0) -> Waveform:
    """Three-phase surface motion maximising upward part velocity.

    Phase 1 rides the part up at the static limit ``(mu_s f_n - 1) g``, phase 2
    drops the surface away at ``-a_max`` and phase 3 catches up at
    ``+a_max``, meeting the part exactly at the end of the period.

    Parameters
    ----------
    margin : float
        Scale on the phase-1 acceleration (``<= 1``). Values below one stay
        inside the static cone and relax the catch-up timing; the phase-2/3
        split is re-solved to keep the surface velocity periodic.

    Raises
    ------
    InfeasibleError
        ``static_hold`` when ``mu_s f_n < 1``; ``max_normal_force`` when
        ``a_max / g <= mu_k f_n + 1``.
    """
    cfg.require("a_max", "period")
    if cfg.gravity <= 0:
        raise ValidationError("the optimal upward waveform needs gravity > 0")
    if not 0 < margin <= 1:
        raise ValidationError(f"margin must be in (0, 1], got {margin}")
    g, T = cfg.gravity, cfg.period
    f_n, alpha = cfg.f_n, cfg.alpha
    mu_s, mu_k = fric.mu_s, fric.mu_k
    if mu_s * f_n < 1 - 1e-12:
        raise InfeasibleError(
            f"static_hold violated: f_n={f_n:.6g} < 1/mu_s={1 / mu_s:.6g}", bound="static_hold")
    if alpha <= mu_k * f_n + 1:
        raise InfeasibleError(
            f"max_normal_force violated: f_n={f_n:.6g} >= f_n,max={(alpha - 1) / mu_k:.6g}",
            bound="max_normal_force")

    frac1, frac2 = optimal_switch_fractions(fric, f_n, alpha)
    t1 = frac1 * T
    a1 = max(mu_s * f_n - 1, 0.0) * g
    if margin == 1.0:
        t2 = frac2 * T
    else:
        a1 *= margin
        t2 = t1 + 0.5 * (a1 * t1 / cfg.a_max + (T - t1))
    durations = [t1, t2 - t1, T - t2]
    accels = [a1, -cfg.a_max, cfg.a_max]
    keep = [i for i, d in enumerate(durations) if d > 1e-12 * T]
    return Waveform(T, tuple(durations[i] for i in keep), tuple(accels[i] for i in keep),
                    name="optimal")


def sawtooth_waveform(cfg: TransportConfig, up_fraction: float, up_accel: float,
                      fric: FrictionPair | None = None) -> Waveform:
    """Two-phase profile: slow rise at ``up_accel`` then a sharp return.

    The return acceleration ``-up_accel * up_fraction / (1 - up_fraction)``
    closes the surface velocity over the period.
    """
    cfg.require("period")
    if not 0 < up_fraction < 1:
        raise ValidationError(f"up_fraction must be in (0, 1), got {up_fraction}")
    T = cfg.period
    down = -up_accel * up_fraction / (1 - up_fraction)
    if cfg.a_max is not None and abs(down) > cfg.a_max * (1 + 1e-12):
        raise InfeasibleError(
            f"down-phase acceleration {abs(down):.6g} exceeds a_max={cfg.a_max:.6g}",
            bound="a_max")
    if cfg.a_max is not None and abs(up_accel) > cfg.a_max * (1 + 1e-12):
        raise InfeasibleError(
            f"up acceleration {abs(up_accel):.6g} exceeds a_max={cfg.a_max:.6g}", bound="a_max")
    if fric is not None:
        need = cfg.effective_mass * abs(up_accel + cfg.gravity)
        if need > fric.mu_s * cfg.normal_force:
            raise InfeasibleError(
                f"up acceleration {up_accel:.6g} leaves the sticking cone", bound="sticking_cone")
    if up_accel == 0:
        return zero_waveform(T)
    return Waveform(T, (up_fraction * T, (1 - up_fraction) * T), (up_accel, down),
                    name="sawtooth")


def sampled_waveform(samples, period: float, closure_tol: float = 0.01,
                     name: str = "sampled") -> Waveform:
    """Piecewise-constant waveform from uniformly sampled accelerations.

    Sample ``i`` holds on ``[i, i+1) * period / n``. A residual mean
    acceleration up to ``closure_tol`` times the peak is subtracted; larger
    residuals are rejected. Runs of equal samples become one segment.
    """
    a = np.asarray(samples, dtype=float)
    if a.ndim != 1 or len(a) == 0:
        raise ValidationError("samples must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(a)):
        raise ValidationError("samples contain non-finite values")
    peak = float(np.max(np.abs(a)))
    if peak == 0:
        return Waveform(period, (period,), (0.0,), name=name)
    mean = float(a.mean())
    if abs(mean) > closure_tol * peak:
        raise ValidationError(
            f"net impulse is {abs(mean) / peak:.3%} of peak acceleration "
            f"(threshold {closure_tol:.3%})")
    a = a - mean
    change = np.flatnonzero(np.diff(a) != 0) + 1
    edges = np.concatenate([[0], change, [len(a)]])
    h = period / len(a)
    durations = tuple(float((e1 - e0) * h) for e0, e1 in zip(edges[:-1], edges[1:]))
    accels = tuple(float(a[e0]) for e0 in edges[:-1])
    return Waveform(period, durations, accels, name=name)


def load_sampled_waveform(path, closure_tol: float = 0.01) -> Waveform:
    """Read a delimited ``t, a`` file; the period is ``n * dt``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["t", "a"]:
        raise ValidationError(f"{path}: expected header 't,a', got {','.join(header)}")
    try:
        data = np.array([[float(x) for x in r[:2]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if len(data) < 2:
        raise ValidationError(f"{path}: need at least 2 samples")
    dts = np.diff(data[:, 0])
    dt = float(dts.mean())
    if dt <= 0 or np.max(np.abs(dts - dt)) > 1e-6 * dt:
        raise ValidationError(f"{path}: samples must be uniformly spaced")
    return sampled_waveform(data[:, 1], dt * len(data), closure_tol=closure_tol,
                            name=f"sampled:{path}")
