"""Planar cable geometry and the two-cable inverse velocity map.

Angles follow the away-from-anchor convention: ``alpha_i`` is the direction
of the unit vector pointing from the payload away from anchor ``i``. With that
datum the inverse of the 2x2 Jacobian collapses to one projection per cable,
``d_dot_i = v . (cos alpha_i, sin alpha_i)``; positive rates pay cable out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

from .config import MOTORS, MotorParams, RobotGeometry, Vec2

EPS_SING = 1e-3


class KinematicsError(ValueError):
    pass


class SingularConfiguration(KinematicsError):
    pass


class SpeedLimitExceeded(KinematicsError):
    def __init__(self, speed: float, limit: float):
        self.speed = speed
        self.limit = limit
        super().__init__(f"motor speed {speed:.3f} rad/s exceeds limit {limit:.3f} rad/s")


@dataclass(frozen=True)
class CableGeom:
    lengths: Dict[str, float]
    angles: Dict[str, float]

    def unit(self, name: str) -> Vec2:
        a = self.angles[name]
        return Vec2(math.cos(a), math.sin(a))


def cable_geometry(p: Vec2, g: RobotGeometry) -> CableGeom:
    lengths = {}
    angles = {}
    for name in MOTORS:
        a = g.anchor(name)
        dx, dy = p.x - a.x, p.y - a.y
        d = math.hypot(dx, dy)
        if d == 0.0:
            raise KinematicsError(f"payload coincides with the {name} anchor")
        lengths[name] = d
        angles[name] = math.atan2(dy, dx)
    return CableGeom(lengths, angles)


def active_side(p: Vec2, g: RobotGeometry) -> str:
    """Side motor in the payload's half plane; a tie goes to the right."""
    return "left" if p.x < g.anchor_top.x else "right"


def rate_matrix(alpha_1: float, alpha_j: float) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """The matrix whose inverse maps (V_x, V_y) to (d_dot_1, d_dot_j)."""
    s = math.sin(alpha_1 - alpha_j)
    return (
        (-math.sin(alpha_j) / s, math.sin(alpha_1) / s),
        (math.cos(alpha_j) / s, -math.cos(alpha_1) / s),
    )


def inverse_velocity(alpha_1: float, alpha_j: float, v: Vec2,
                     eps: float = EPS_SING) -> Tuple[float, float]:
    if abs(math.sin(alpha_1 - alpha_j)) <= eps:
        raise SingularConfiguration(
            f"cables nearly collinear: |sin(a1 - aj)| = {abs(math.sin(alpha_1 - alpha_j)):.2e}")
    return (v.x * math.cos(alpha_1) + v.y * math.sin(alpha_1),
            v.x * math.cos(alpha_j) + v.y * math.sin(alpha_j))


def forward_velocity(alpha_1: float, alpha_j: float, d1: float, dj: float) -> Vec2:
    """Cartesian velocity realising the two cable rates."""
    s = math.sin(alpha_1 - alpha_j)
    return Vec2((-math.sin(alpha_j) * d1 + math.sin(alpha_1) * dj) / s,
                (math.cos(alpha_j) * d1 - math.cos(alpha_1) * dj) / s)


def cable_rate_to_motor_speed(d_dot: float, params: MotorParams) -> float:
    speed = d_dot / params.cable_per_rad
    if abs(speed) > params.max_speed:
        raise SpeedLimitExceeded(speed, params.max_speed)
    return speed


def motor_speed_to_cable_rate(speed: float, params: MotorParams) -> float:
    return speed * params.cable_per_rad


def constrained_arc_state(p: Vec2, g: RobotGeometry) -> Tuple[float, float, Vec2]:
    """Radius, arc angle from straight-down (positive toward +x) and unit tangent."""
    dx = p.x - g.anchor_top.x
    dy = p.y - g.anchor_top.y
    radius = math.hypot(dx, dy)
    phi = math.atan2(dx, -dy)
    return radius, phi, Vec2(math.cos(phi), math.sin(phi))


def circle_intersection(c1: Vec2, r1: float, c2: Vec2, r2: float, near: Vec2) -> Vec2:
    """Intersection of two circles closest to ``near``.

    Raises KinematicsError when the circles do not meet.
    """
    dx, dy = c2.x - c1.x, c2.y - c1.y
    d = math.hypot(dx, dy)
    if d == 0.0 or d > r1 + r2 + 1e-12 or d < abs(r1 - r2) - 1e-12:
        raise KinematicsError(
            f"no circle intersection: |c1c2|={d:.6f}, r1={r1:.6f}, r2={r2:.6f}")
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    mx, my = c1.x + a * dx / d, c1.y + a * dy / d
    ox, oy = -dy * h / d, dx * h / d
    p1x, p1y = mx + ox, my + oy
    p2x, p2y = mx - ox, my - oy
    if (p1x - near.x) ** 2 + (p1y - near.y) ** 2 <= (p2x - near.x) ** 2 + (p2y - near.y) ** 2:
        return Vec2(p1x, p1y)
    return Vec2(p2x, p2y)
