"""Point-to-point baseline: trapezoidal Cartesian segments through waypoints.

The baseline visits the same waypoints as the proposed controller and is
stretched so both runs last equally long. Every motor stays powered and every
brake stays energized for the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .config import ScenarioConfig, Vec2
from .controllers import ActuatorCommand, cartesian_velocity_cmd
from .plant import SensorFrame

_BISECT_ITERS = 200


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class TrapezoidProfile:
    """Rest-to-rest 1-D motion of length ``distance``."""

    distance: float
    v_peak: float
    accel: float
    t_accel: float
    t_cruise: float

    @property
    def total_time(self) -> float:
        return 2.0 * self.t_accel + self.t_cruise

    @property
    def triangular(self) -> bool:
        return self.t_cruise <= 0.0

    def velocity(self, t: float) -> float:
        if t <= 0.0 or t >= self.total_time:
            return 0.0
        if t < self.t_accel:
            return self.accel * t
        if t <= self.t_accel + self.t_cruise:
            return self.v_peak
        return self.accel * (self.total_time - t)

    def position(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= self.total_time:
            return self.distance
        ta, tc = self.t_accel, self.t_cruise
        if t < ta:
            return 0.5 * self.accel * t * t
        d_acc = 0.5 * self.accel * ta * ta
        if t <= ta + tc:
            return d_acc + self.v_peak * (t - ta)
        rem = self.total_time - t
        return self.distance - 0.5 * self.accel * rem * rem


def _min_time_profile(distance: float, v_max: float, a_max: float) -> TrapezoidProfile:
    if distance <= 0.0:
        return TrapezoidProfile(0.0, 0.0, a_max, 0.0, 0.0)
    if distance < v_max * v_max / a_max:
        v = math.sqrt(distance * a_max)
        return TrapezoidProfile(distance, v, a_max, v / a_max, 0.0)
    ta = v_max / a_max
    return TrapezoidProfile(distance, v_max, a_max, ta, distance / v_max - ta)


def trapezoid(distance: float, v_max: float, a_max: float,
              stretch_to: Optional[float] = None) -> TrapezoidProfile:
    """Minimum-time profile, or the slower one lasting exactly ``stretch_to``.

    Stretching keeps ``a_max`` and lowers the cruise speed.
    """
    if distance < 0.0 or v_max <= 0.0 or a_max <= 0.0:
        raise PlanError("distance must be >= 0 and limits > 0")
    fastest = _min_time_profile(distance, v_max, a_max)
    if stretch_to is None or distance == 0.0:
        return fastest
    if stretch_to < fastest.total_time - 1e-12:
        raise PlanError(f"cannot cover {distance:.4f} m in {stretch_to:.4f} s "
                        f"(minimum {fastest.total_time:.4f} s)")
    disc = stretch_to * stretch_to * a_max * a_max - 4.0 * a_max * distance
    v = 0.5 * (stretch_to * a_max - math.sqrt(max(disc, 0.0)))
    ta = v / a_max
    return TrapezoidProfile(distance, v, a_max, ta, max(stretch_to - 2.0 * ta, 0.0))


@dataclass(frozen=True)
class Segment:
    start: Vec2
    end: Vec2
    profile: TrapezoidProfile
    t0: float

    @property
    def t1(self) -> float:
        return self.t0 + self.profile.total_time

    def reference(self, t: float) -> Tuple[Vec2, Vec2]:
        d = self.profile.distance
        tau = t - self.t0
        if d == 0.0:
            return self.start, Vec2(0.0, 0.0)
        ux, uy = (self.end.x - self.start.x) / d, (self.end.y - self.start.y) / d
        s, v = self.profile.position(tau), self.profile.velocity(tau)
        return Vec2(self.start.x + ux * s, self.start.y + uy * s), Vec2(ux * v, uy * v)


@dataclass(frozen=True)
class PtpPlan:
    waypoints: Tuple[Vec2, ...]
    segments: Tuple[Segment, ...]
    labels: Tuple[int, ...]  # event id reached at the start of each waypoint
    columns: Tuple[str, ...]  # energy column for each segment

    @property
    def total_time(self) -> float:
        return self.segments[-1].t1

    def event_times(self) -> List[Tuple[int, float]]:
        return [(self.labels[0], 0.0)] + [(lab, s.t1) for lab, s in zip(self.labels[1:], self.segments)]

    def segment_index(self, t: float) -> int:
        for i, s in enumerate(self.segments):
            if t < s.t1:
                return i
        return len(self.segments) - 1

    def reference(self, t: float) -> Tuple[Vec2, Vec2]:
        return self.segments[self.segment_index(t)].reference(t)


def _dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def build_ptp_plan(cfg: ScenarioConfig, reference_duration: float, drop_x: float,
                   start: Optional[Vec2] = None) -> PtpPlan:
    """Five straight segments stretched to ``reference_duration`` seconds.

    Vertical moves run at the task's lift and fine speeds; both horizontal
    transports share one cruise speed, found by bisection so the plan length
    matches the reference.
    """
    g = cfg.geometry
    task, ptp = cfg.task, cfg.ptp
    rest_y = g.ground_y + cfg.payload_halfwidth
    if start is None:
        start = Vec2(cfg.start_x, rest_y)
    w = (
        start,
        Vec2(start.x, task.h_d),
        Vec2(drop_x, task.h_d),
        Vec2(drop_x, rest_y + ptp.drop_clearance),
        Vec2(g.target_x, rest_y + ptp.drop_clearance),
        Vec2(g.target_x, rest_y),
    )
    fixed = [
        trapezoid(_dist(w[0], w[1]), task.lift_speed, ptp.a_max),
        trapezoid(_dist(w[2], w[3]), task.lift_speed, ptp.a_max),
        trapezoid(_dist(w[4], w[5]), task.fine_speed, ptp.a_max),
    ]
    budget = reference_duration - sum(p.total_time for p in fixed)
    transports = (_dist(w[1], w[2]), _dist(w[3], w[4]))

    def span(v: float) -> float:
        return sum(_min_time_profile(d, v, ptp.a_max).total_time for d in transports)

    if budget < span(ptp.v_max) - 1e-9:
        raise PlanError(f"reference duration {reference_duration:.3f} s is shorter than the "
                        f"fastest plan {reference_duration - budget + span(ptp.v_max):.3f} s")
    lo, hi = 0.0, ptp.v_max
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if span(mid) > budget:
            lo = mid
        else:
            hi = mid
    cruise = hi
    moving = [_min_time_profile(d, cruise, ptp.a_max) for d in transports]
    profiles = [fixed[0], moving[0], fixed[1], moving[1], fixed[2]]
    segs = []
    t = 0.0
    for i, prof in enumerate(profiles):
        segs.append(Segment(w[i], w[i + 1], prof, t))
        t += prof.total_time
    return PtpPlan(w, tuple(segs), (1, 2, 3, 5, 6, 7), ("1-2", "2-3", "3-5", "5-6", "6-7"))


def ptp_tracking_cmd(plan: PtpPlan, t: float, sensors: SensorFrame,
                     cfg: ScenarioConfig) -> ActuatorCommand:
    """Profile feed-forward plus proportional position correction."""
    p_ref, v_ref = plan.reference(t)
    p = sensors.position
    kp = cfg.ptp.kp
    v = Vec2(v_ref.x + kp * (p_ref.x - p.x), v_ref.y + kp * (p_ref.y - p.y))
    return cartesian_velocity_cmd(v, sensors, cfg, keep_inactive=True)
