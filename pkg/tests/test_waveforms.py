import json

import numpy as np
import pytest

from vibrolift.dynamics import FrictionPair, TransportConfig
from vibrolift.errors import InfeasibleError, ValidationError
from vibrolift.waveforms import (Waveform, load_sampled_waveform, optimal_switch_fractions,
                                 optimal_waveform, sampled_waveform, sawtooth_waveform,
                                 zero_waveform)

G = 9.81
FRIC = FrictionPair(0.7, 0.6)


def cfg_nd(f_n=5.0, alpha=10.0, period=0.05):
    return TransportConfig.from_nondimensional(f_n, alpha, period=period)


def test_switch_fractions_for_reference_point():
    t1, t2 = optimal_switch_fractions(FRIC, 5.0, 10.0)
    assert t1 == pytest.approx(4 / 6.5)
    # surface velocity must close: a1*T1 - a*(T2-T1) + a*(T-T2) = 0
    a1 = 2.5
    assert a1 * t1 - 10 * (t2 - t1) + 10 * (1 - t2) == pytest.approx(0.0, abs=1e-12)


def test_optimal_waveform_segments():
    cfg = cfg_nd()
    wf = optimal_waveform(FRIC, cfg)
    assert wf.name == "optimal"
    assert len(wf.durations) == 3
    assert wf.accelerations[0] == pytest.approx(2.5 * G)
    assert wf.accelerations[1:] == pytest.approx((-10 * G, 10 * G))
    assert sum(wf.durations) == pytest.approx(0.05)
    assert wf.max_abs_acceleration() == pytest.approx(cfg.a_max)


def test_optimal_rise_stays_inside_static_cone():
    for f_n in (2.0, 5.0, 9.0):
        cfg = cfg_nd(f_n, 20.0)
        wf = optimal_waveform(FRIC, cfg)
        need = cfg.part_mass * (wf.accelerations[0] + G)
        assert need <= FRIC.mu_s * cfg.normal_force * (1 + 1e-12)


def test_optimal_waveform_at_static_hold_edge_collapses_slip_phase():
    cfg = cfg_nd(1 / 0.7, 10.0)
    t1, t2 = optimal_switch_fractions(FRIC, 1 / 0.7, 10.0)
    assert t1 == pytest.approx(1.0) and t2 == pytest.approx(t1)
    # the rise takes the whole period at zero acceleration: the surface stands still
    wf = optimal_waveform(FRIC, cfg)
    assert wf.durations == pytest.approx((0.05,))
    assert wf.accelerations == (0.0,)


@pytest.mark.parametrize("f_n, alpha, bound", [(1.0, 10.0, "static_hold"),
                                               (16.0, 10.0, "max_normal_force")])
def test_optimal_waveform_rejects_infeasible(f_n, alpha, bound):
    with pytest.raises(InfeasibleError) as info:
        optimal_waveform(FRIC, cfg_nd(f_n, alpha))
    assert info.value.bound == bound


def test_optimal_waveform_margin_keeps_periodicity():
    wf = optimal_waveform(FRIC, cfg_nd(), margin=0.9)
    assert wf.accelerations[0] == pytest.approx(0.9 * 2.5 * G)
    assert wf.net_velocity_change() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        optimal_waveform(FRIC, cfg_nd(), margin=1.5)


def test_position_amplitude_scales_with_period_squared():
    a = optimal_waveform(FRIC, cfg_nd(period=0.05))
    b = optimal_waveform(FRIC, cfg_nd(period=0.1))
    t = np.linspace(0, 1, 501, endpoint=False)
    amp_a = np.ptp(a.position(t * 0.05))
    amp_b = np.ptp(b.position(t * 0.1))
    assert amp_b / amp_a == pytest.approx(4.0, rel=1e-9)


def test_velocity_zero_mean_and_position_periodic():
    wf = optimal_waveform(FRIC, cfg_nd(7.0, 15.0))
    t = np.linspace(0, wf.period, 200001)
    v = wf.velocity(t)
    assert abs(np.trapezoid(v, t) if hasattr(np, "trapezoid") else np.trapz(v, t)) < 1e-9
    assert wf.position(0.0) == pytest.approx(wf.position(wf.period), abs=1e-15)
    assert wf.velocity(0.0) == pytest.approx(wf.velocity(wf.period), abs=1e-12)


def test_waveform_rejects_open_velocity():
    with pytest.raises(ValidationError):
        Waveform(1.0, (0.5, 0.5), (1.0, -0.5))
    with pytest.raises(ValidationError):
        Waveform(1.0, (0.5, 0.6), (1.0, -1.0))


def test_check_limit():
    wf = optimal_waveform(FRIC, cfg_nd())
    wf.check_limit(10 * G)
    with pytest.raises(ValidationError):
        wf.check_limit(5 * G)


def test_sawtooth_balance():
    cfg = cfg_nd()
    wf = sawtooth_waveform(cfg, 0.9, G)
    assert wf.accelerations == pytest.approx((G, -9 * G))
    sym = sawtooth_waveform(cfg, 0.5, 3.0)
    assert sym.accelerations == pytest.approx((3.0, -3.0))


def test_sawtooth_limits():
    cfg = cfg_nd()
    with pytest.raises(ValidationError):
        sawtooth_waveform(cfg, 1.0, G)
    with pytest.raises(InfeasibleError):
        sawtooth_waveform(cfg, 0.95, G)  # down phase needs 19 g > 10 g
    with pytest.raises(InfeasibleError):
        sawtooth_waveform(cfg, 0.5, 5 * G, fric=FRIC)  # rise leaves the cone


def test_sampled_zero_samples_give_zero_waveform():
    wf = sampled_waveform(np.zeros(100), 0.05)
    assert wf.accelerations == (0.0,)
    assert wf.max_speed() == 0.0


def test_sampled_round_trip_of_optimal():
    wf = optimal_waveform(FRIC, cfg_nd())
    n = 2000
    h = wf.period / n
    samples = wf.acceleration((np.arange(n) + 0.5) * h)
    back = sampled_waveform(samples, wf.period, closure_tol=0.01)
    assert len(back.durations) == len(wf.durations)
    for got, want in zip(np.cumsum(back.durations), np.cumsum(wf.durations)):
        assert abs(got - want) <= h
    assert np.allclose(back.accelerations, wf.accelerations, rtol=0.01)


def test_sampled_rejects_large_net_impulse():
    samples = np.concatenate([np.full(50, 10.0), np.full(50, -9.0)])  # mean 5% of peak
    with pytest.raises(ValidationError):
        sampled_waveform(samples, 0.05)
    corrected = sampled_waveform(samples, 0.05, closure_tol=0.06)
    assert corrected.net_velocity_change() == pytest.approx(0.0, abs=1e-12)


def test_json_round_trip(tmp_path):
    wf = optimal_waveform(FRIC, cfg_nd())
    path = tmp_path / "wf.json"
    wf.save_json(path)
    data = json.loads(path.read_text())
    assert data["period"] == wf.period
    assert Waveform.load_json(path) == wf


def test_load_sampled_file(tmp_path):
    path = tmp_path / "a.csv"
    rows = ["t,a"] + [f"{i * 0.001},{v}" for i, v in enumerate([5.0] * 10 + [-5.0] * 10)]
    path.write_text("\n".join(rows) + "\n")
    wf = load_sampled_waveform(path)
    assert wf.period == pytest.approx(0.02)
    assert wf.accelerations == pytest.approx((5.0, -5.0))
    bad = tmp_path / "b.csv"
    bad.write_text("time,accel\n0,1\n")
    with pytest.raises(ValidationError):
        load_sampled_waveform(bad)


def test_zero_waveform_is_still():
    wf = zero_waveform(0.05)
    assert wf.position(0.01) == 0.0 and wf.velocity(0.03) == 0.0
