"""Closed-form transport limits, optimal squeeze force and parameter sweeps.

Everything here is nondimensional: ``f_n = F_n / (m g)`` and
``alpha = a_max / g``, with velocities reported as ``v_ave / (g T)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import FrictionPair, TransportConfig, simulate, steady_state_velocity
from .errors import InfeasibleError, ValidationError
from .waveforms import optimal_waveform

#: bound names reported by :func:`feasibility_report`
STATIC_HOLD = "static_hold"
SLIP_RECOVERY = "slip_recovery"
SLIP_ONSET = "slip_onset"
MAX_NORMAL_FORCE = "max_normal_force"


@dataclass(frozen=True)
class NondimensionalPoint:
    f_n: float
    alpha: float
    mu_s: float
    mu_k: float

    def __post_init__(self):
        if not (self.f_n > 0 and self.alpha > 0):
            raise ValidationError("f_n and alpha must be positive")
        FrictionPair(self.mu_s, self.mu_k)

    @property
    def friction(self) -> FrictionPair:
        return FrictionPair(self.mu_s, self.mu_k)

    @classmethod
    def from_config(cls, fric: FrictionPair, cfg: TransportConfig) -> "NondimensionalPoint":
        return cls(cfg.f_n, cfg.alpha, fric.mu_s, fric.mu_k)


def _v_norm(f_n, alpha, mu_s, mu_k):
    return ((mu_s * f_n - 1) ** 2 * (alpha**2 - (mu_k * f_n + 1) ** 2)
            / (4 * alpha * (mu_s + mu_k) ** 2 * f_n**2))


def in_band(f_n, alpha, mu_s, mu_k):
    """Whether ``f_n`` lies strictly inside ``(1/mu_s, (alpha - 1)/mu_k)``."""
    f_n = np.asarray(f_n, dtype=float)
    return (mu_s * f_n > 1) & (mu_k * f_n + 1 < alpha)


def v_ave_closed_form(p: NondimensionalPoint) -> float:
    """Average upward part velocity under the optimal waveform, over ``g T``.

    Zero outside the band ``1/mu_s < f_n < f_n,max``.
    """
    if not in_band(p.f_n, p.alpha, p.mu_s, p.mu_k):
        return 0.0
    return float(_v_norm(p.f_n, p.alpha, p.mu_s, p.mu_k))


def v_ave_grid(f_n, alpha, mu_s, mu_k) -> np.ndarray:
    """Vectorised :func:`v_ave_closed_form` over arrays of ``f_n``."""
    f_n = np.asarray(f_n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = _v_norm(f_n, alpha, mu_s, mu_k)
    return np.where(in_band(f_n, alpha, mu_s, mu_k), v, 0.0)


def f_n_max(alpha: float, mu_k: float) -> float:
    """Normal force per weight above which the surface cannot slip below the part."""
    if not alpha > 1:
        raise ValidationError(f"alpha must exceed 1, got {alpha}")
    return (alpha - 1) / mu_k


def _stationarity(f_n, alpha, mu_s, mu_k):
    # d/df [(mu_s f - 1)^2 h(f)] = (mu_s f - 1) * G(f); this is G(f)
    n = alpha**2 - (mu_k * f_n + 1) ** 2
    dn = -2 * mu_k * (mu_k * f_n + 1)
    c = 4 * alpha * (mu_s + mu_k) ** 2
    h = n / (c * f_n**2)
    dh = (dn * f_n - 2 * n) / (c * f_n**3)
    return 2 * mu_s * h + (mu_s * f_n - 1) * dh


def optimal_f_n(alpha: float, fric: FrictionPair, xtol: float = 1e-14):
    """Normal force per weight maximising the closed-form velocity.

    The maximiser is the interior root of the derivative of the closed form,
    bracketed by the band ends and refined with Brent's method.

    Returns
    -------
    f_star, v_star : float
    """
    lo = 1 / fric.mu_s
    hi = (alpha - 1) / fric.mu_k
    if not hi > lo * (1 + 1e-12):  # a round-off sliver is still an empty band
        raise InfeasibleError(
            f"empty feasible band: f_n,max={hi:.6g} <= 1/mu_s={lo:.6g}", bound=MAX_NORMAL_FORCE)
    args = (alpha, fric.mu_s, fric.mu_k)
    f_star = brentq(_stationarity, lo, hi, args=args, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return float(f_star), float(_v_norm(f_star, *args))


@dataclass(frozen=True)
class Bound:
    name: str
    satisfied: bool
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    point: NondimensionalPoint
    bounds: tuple

    @property
    def feasible(self) -> bool:
        return all(b.satisfied for b in self.bounds)

    @property
    def violated(self) -> list[str]:
        return [b.name for b in self.bounds if not b.satisfied]

    def to_dict(self) -> dict:
        return {"f_n": self.point.f_n, "alpha": self.point.alpha,
                "mu_s": self.point.mu_s, "mu_k": self.point.mu_k,
                "feasible": self.feasible,
                "bounds": [{"name": b.name, "satisfied": b.satisfied, "detail": b.detail}
                           for b in self.bounds]}


def feasibility_report(p: NondimensionalPoint) -> FeasibilityReport:
    """Check every necessary condition for upward transport.

    ``static_hold``: the part can hang on a still surface, ``f_n > 1/mu_s``.
    ``slip_recovery``: kinetic friction can stop a downward slide,
    ``f_n > 1/mu_k``. ``slip_onset``: the surface can pull out from under a
    stuck part, ``alpha > mu_s f_n + 1`` (which forces ``alpha > 2`` once the
    part can be held). ``max_normal_force``: ``f_n < (alpha - 1)/mu_k``.
    """
    f, a, ms, mk = p.f_n, p.alpha, p.mu_s, p.mu_k
    bounds = (
        Bound(STATIC_HOLD, ms * f > 1, f"f_n={f:.6g} vs 1/mu_s={1 / ms:.6g}"),
        Bound(SLIP_RECOVERY, mk * f > 1, f"f_n={f:.6g} vs 1/mu_k={1 / mk:.6g}"),
        Bound(SLIP_ONSET, a > ms * f + 1, f"alpha={a:.6g} vs mu_s*f_n+1={ms * f + 1:.6g}"),
        Bound(MAX_NORMAL_FORCE, mk * f + 1 < a,
              f"f_n={f:.6g} vs f_n,max={(a - 1) / mk:.6g}"),
    )
    return FeasibilityReport(p, bounds)


def equivalent_horizontal_coefficients(fric: FrictionPair, f_n: float):
    """Fictitious coefficients that turn upward transport into horizontal transport.

    Valid only while the part sticks or slips up relative to the surface.
    """
    if not f_n > 0:
        raise ValidationError("f_n must be positive")
    return fric.mu_s * f_n - 1, fric.mu_k * f_n + 1


def simulated_v_norm(point: NondimensionalPoint, *, period=0.05, part_mass=0.009,
                     n_periods=13, steps_per_period=None) -> float:
    """Steady-state ``v_ave / (g T)`` from simulating the optimal waveform."""
    cfg = TransportConfig.from_nondimensional(point.f_n, point.alpha,
                                              part_mass=part_mass, period=period)
    fric = point.friction
    kwargs = {} if steps_per_period is None else {"steps_per_period": steps_per_period}
    traj = simulate(optimal_waveform(fric, cfg), fric, cfg, n_periods, **kwargs)
    return steady_state_velocity(traj) / (cfg.gravity * cfg.period)


@dataclass
class SweepResult:
    """``v_ave / (g T)`` over an ``(alpha, f_n)`` grid.

    ``v_norm[i, j]`` belongs to ``alphas[i]`` and ``f_n[j]``. ``feasible``
    marks grid points that pass every bound of :func:`feasibility_report`.
    """

    friction: FrictionPair
    alphas: np.ndarray
    f_n: np.ndarray
    v_norm: np.ndarray
    feasible: np.ndarray
    optimum_f_n: np.ndarray
    optimum_v: np.ndarray
    verification: list = field(default_factory=list)

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, f in enumerate(self.f_n):
                yield float(a), float(f), float(self.v_norm[i, j]), bool(self.feasible[i, j])

    def optimum_summary(self) -> dict:
        out = {"mu_s": self.friction.mu_s, "mu_k": self.friction.mu_k, "optimum": []}
        for a, f, v in zip(self.alphas, self.optimum_f_n, self.optimum_v):
            out["optimum"].append({
                "alpha": float(a),
                "f_n_star": None if math.isnan(f) else float(f),
                "v_norm_star": None if math.isnan(v) else float(v),
                "f_n_min": 1 / self.friction.mu_s,
                "f_n_max": float((a - 1) / self.friction.mu_k) if a > 1 else None,
            })
        if self.verification:
            out["verification"] = self.verification
        return out

    def to_json(self) -> str:
        data = self.optimum_summary()
        data["table"] = [dict(zip(("alpha", "f_n", "v_norm", "feasible"), r))
                         for r in self.rows()]
        return json.dumps(data, indent=2)


def sweep(fric: FrictionPair, alphas, f_n_grid, *, verify_sim: int = 0, seed: int = 0,
          period: float = 0.05) -> SweepResult:
    """Tabulate the closed-form velocity over a grid.

    With ``verify_sim > 0`` that many feasible grid points, drawn with
    ``seed``, are re-computed by simulating the optimal waveform; each entry
    of ``verification`` records both values and their relative error.
    """
    alphas = np.asarray(alphas, dtype=float)
    f_n = np.asarray(f_n_grid, dtype=float)
    if alphas.ndim != 1 or f_n.ndim != 1 or not len(alphas) or not len(f_n):
        raise ValidationError("alpha and f_n grids must be non-empty 1-D sequences")
    if np.any(np.diff(alphas) < 0) or np.any(np.diff(f_n) < 0):
        raise ValidationError("grids must be sorted")
    if np.any(alphas <= 0) or np.any(f_n <= 0):
        raise ValidationError("grid values must be positive")
    ms, mk = fric.mu_s, fric.mu_k
    v = np.vstack([v_ave_grid(f_n, a, ms, mk) for a in alphas])
    feasible = np.vstack([(ms * f_n > 1) & (mk * f_n > 1) & (a > ms * f_n + 1)
                          & (mk * f_n + 1 < a) for a in alphas])
    opt_f = np.full(len(alphas), np.nan)
    opt_v = np.full(len(alphas), np.nan)
    for i, a in enumerate(alphas):
        if a > 1:
            try:
                opt_f[i], opt_v[i] = optimal_f_n(a, fric)
            except InfeasibleError:
                pass
    result = SweepResult(fric, alphas, f_n, v, feasible, opt_f, opt_v)

    if verify_sim:
        cand = np.argwhere(feasible)
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(cand), size=min(verify_sim, len(cand)), replace=False)
        for k in sorted(picks):
            i, j = cand[k]
            point = NondimensionalPoint(float(f_n[j]), float(alphas[i]), ms, mk)
            v_sim = simulated_v_norm(point, period=period)
            v_cf = float(v[i, j])
            result.verification.append({
                "alpha": point.alpha, "f_n": point.f_n, "v_closed_form": v_cf,
                "v_simulated": v_sim, "rel_error": abs(v_sim - v_cf) / abs(v_cf)})
    return result


DEFAULT_ALPHAS = (5.0, 10.0, 15.0, 20.0, 30.0, 40.0)
DEFAULT_F_N_GRID = np.linspace(1.0, 40.0, 400)
