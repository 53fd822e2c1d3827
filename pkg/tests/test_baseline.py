import math

import numpy as np
import pytest

from cablesim.baseline import PlanError, build_ptp_plan, trapezoid
from cablesim.config import MOTORS, default_scenario


def test_trapezoid_worked_example():
    p = trapezoid(1.0, 0.5, 1.0)
    assert p.t_accel == pytest.approx(0.5)
    assert p.t_cruise == pytest.approx(1.5)
    assert p.total_time == pytest.approx(2.5)
    assert not p.triangular


def test_short_move_is_triangular():
    p = trapezoid(0.1, 0.5, 1.0)
    assert p.triangular
    assert p.v_peak == pytest.approx(math.sqrt(0.1))
    assert p.total_time == pytest.approx(2 * math.sqrt(0.1))


def test_zero_and_invalid_moves():
    assert trapezoid(0.0, 0.5, 1.0).total_time == 0.0
    with pytest.raises(PlanError):
        trapezoid(-1.0, 0.5, 1.0)
    with pytest.raises(PlanError):
        trapezoid(1.0, 0.0, 1.0)


def quadrature(profile, t_end=None):
    """Trapezoid-rule integral of the velocity with every breakpoint on the grid."""
    t_end = profile.total_time if t_end is None else t_end
    ta, tc = profile.t_accel, profile.t_cruise
    pts = [x for x in (ta, ta + tc) if x < t_end]
    t = np.unique(np.concatenate([np.linspace(0.0, t_end, 2001), pts]))
    v = np.array([profile.velocity(x) for x in t])
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


def test_random_profiles_integrate_to_their_distance():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        d = rng.uniform(1e-3, 2.0)
        v = rng.uniform(0.01, 1.0)
        a = rng.uniform(0.05, 3.0)
        p = trapezoid(d, v, a)
        assert p.position(p.total_time) == pytest.approx(d, abs=1e-9)
        assert p.v_peak <= v + 1e-12
    for _ in range(200):
        d, v, a = rng.uniform(1e-3, 2.0), rng.uniform(0.01, 1.0), rng.uniform(0.05, 3.0)
        p = trapezoid(d, v, a, stretch_to=trapezoid(d, v, a).total_time * rng.uniform(1.0, 4.0))
        assert quadrature(p) == pytest.approx(d, abs=1e-9)
        mid = 0.37 * p.total_time
        assert p.position(mid) == pytest.approx(quadrature(p, mid), abs=1e-9)


def test_stretching_keeps_limits_and_hits_the_duration():
    fastest = trapezoid(0.5, 0.2, 0.5)
    slow = trapezoid(0.5, 0.2, 0.5, stretch_to=6.0)
    assert slow.total_time == pytest.approx(6.0)
    assert slow.v_peak < fastest.v_peak
    assert slow.accel == 0.5
    same = trapezoid(0.5, 0.2, 0.5, stretch_to=fastest.total_time)
    assert same.v_peak == pytest.approx(fastest.v_peak)
    with pytest.raises(PlanError):
        trapezoid(0.5, 0.2, 0.5, stretch_to=fastest.total_time * 0.9)


def test_plan_visits_the_waypoints_without_the_contact_event():
    cfg = default_scenario()
    plan = build_ptp_plan(cfg, 13.0, 0.74)
    assert plan.labels == (1, 2, 3, 5, 6, 7)
    assert plan.columns == ("1-2", "2-3", "3-5", "5-6", "6-7")
    assert plan.total_time == pytest.approx(13.0, abs=1e-9)
    for seg, (a, b) in zip(plan.segments, zip(plan.waypoints, plan.waypoints[1:])):
        start, _ = seg.reference(seg.t0)
        end, v_end = seg.reference(seg.t1)
        assert (start.x, start.y) == pytest.approx((a.x, a.y), abs=1e-12)
        assert (end.x, end.y) == pytest.approx((b.x, b.y), abs=1e-9)
        assert (v_end.x, v_end.y) == pytest.approx((0.0, 0.0), abs=1e-12)
    w = plan.waypoints
    assert w[-1].x == cfg.geometry.target_x
    assert w[1].y == w[2].y == cfg.task.h_d


@pytest.mark.parametrize("duration", [13.176, 16.0, 20.0])
def test_transport_cruise_speed_matches_the_closed_form(duration):
    cfg = default_scenario()
    plan = build_ptp_plan(cfg, duration, 0.74)
    fixed = sum(plan.segments[i].profile.total_time for i in (0, 2, 4))
    budget = duration - fixed
    d = plan.segments[1].profile.distance + plan.segments[3].profile.distance
    a = cfg.ptp.a_max
    assert not plan.segments[1].profile.triangular and not plan.segments[3].profile.triangular
    # both trapezoids share v: d / v + 2 v / a = budget
    v = (budget * a - math.sqrt(budget ** 2 * a ** 2 - 8 * a * d)) / 4
    assert plan.segments[1].profile.v_peak == pytest.approx(v, rel=1e-9)
    assert plan.segments[3].profile.v_peak == pytest.approx(v, rel=1e-9)


def test_too_short_reference_is_rejected():
    with pytest.raises(PlanError):
        build_ptp_plan(default_scenario(), 5.0, 0.74)


def test_ptp_run_tracks_the_plan(ptp_log, proposed_log):
    cfg = default_scenario()
    assert ptp_log.event_ids() == [1, 2, 3, 5, 6, 7]
    assert ptp_log.duration == pytest.approx(proposed_log.duration, abs=cfg.dt)
    x, y = ptp_log.summary["final_position"]
    assert math.hypot(x - cfg.geometry.target_x, y - (cfg.geometry.ground_y + cfg.payload_halfwidth)) < 5e-3
    for m in MOTORS:
        assert np.all(ptp_log.column(f"brake_{m}_energized"))
