"""Continuous control layer: per-tick actuator commands for each subtask.

Commands are plain values. The only memory is the brake hysteresis latch used
by the drop and the fine swing, kept in a small object owned by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

from .actuation import MotorMode
from .config import MOTORS, ScenarioConfig, Vec2
from .kinematics import SpeedLimitExceeded, active_side, cable_geometry, cable_rate_to_motor_speed, inverse_velocity
from .plant import SensorFrame

FINE_SUBPHASES = ("FineLift", "FineSwing", "FineDrop")


@dataclass
class ActuatorCommand:
    motors: Dict[str, Tuple[MotorMode, float]]
    brakes: Dict[str, bool]  # True = energized = released
    scaled: float = 1.0

    def mode(self, name: str) -> MotorMode:
        return self.motors[name][0]


def _passive_all() -> ActuatorCommand:
    return ActuatorCommand({m: (MotorMode.PASSIVE, 0.0) for m in MOTORS}, {m: True for m in MOTORS})


def other_side(side: str) -> str:
    return "right" if side == "left" else "left"


@dataclass
class BrakeLatch:
    """Two-level hysteresis on a speed: release below ``lo``, engage above ``hi``."""

    released: bool = True

    def update(self, speed: float, lo: float, hi: float) -> bool:
        if speed < lo:
            self.released = True
        elif speed > hi:
            self.released = False
        return self.released


def cartesian_velocity_cmd(v_des: Vec2, sensors: SensorFrame, cfg: ScenarioConfig,
                           keep_inactive: bool = False, idle_keeper: bool = True) -> ActuatorCommand:
    """Top and active-side velocity setpoints realising ``v_des``.

    The inactive side motor is unpowered while its cable pays out under
    gravity and holds the keeper current while the motion shortens it.
    ``keep_inactive`` keeps it at the keeper current throughout (baseline);
    ``idle_keeper=False`` leaves it unpowered and lets its cable go slack.
    """
    p = sensors.position
    g = cfg.geometry
    geom = cable_geometry(p, g)
    side = active_side(p, g)
    idle = other_side(side)
    d_top, d_side = inverse_velocity(geom.angles["top"], geom.angles[side], v_des)
    rates = {"top": d_top, side: d_side}
    scale = 1.0
    for name, rate in rates.items():
        try:
            cable_rate_to_motor_speed(rate, cfg.motors[name])
        except SpeedLimitExceeded as exc:
            scale = min(scale, exc.limit / abs(exc.speed))
    cmd = _passive_all()
    cmd.scaled = scale
    for name, rate in rates.items():
        cmd.motors[name] = (MotorMode.VELOCITY, rate * scale / cfg.motors[name].cable_per_rad)
    u = geom.unit(idle)
    idle_rate = v_des.x * u.x + v_des.y * u.y
    if keep_inactive or (idle_keeper and idle_rate < 0.0):
        cmd.motors[idle] = (MotorMode.CURRENT, -cfg.task.keeper_current)
    return cmd


def swing_cmd(sensors: SensorFrame, cfg: ScenarioConfig, arriving: str) -> ActuatorCommand:
    """Top braked, side power released; keeper on the arriving side."""
    cmd = _passive_all()
    cmd.brakes["top"] = False
    cmd.motors[arriving] = (MotorMode.CURRENT, -cfg.task.keeper_current)
    return cmd


def hold_cmd(cfg: ScenarioConfig, arriving: str) -> ActuatorCommand:
    """Top and arriving-side brakes engaged; every motor unpowered."""
    cmd = _passive_all()
    cmd.brakes["top"] = False
    cmd.brakes[arriving] = False
    return cmd


def drop_cmd(sensors: SensorFrame, cfg: ScenarioConfig, latch: BrakeLatch,
             velocity: Vec2) -> ActuatorCommand:
    """Top pays out under velocity control; the side brake regulates descent.

    The side motor stays unpowered: its brake is released while the descent
    is slower than ``drop_v_lo`` and engaged once it exceeds ``drop_v_hi``.
    """
    side = active_side(sensors.position, cfg.geometry)
    cmd = _passive_all()
    top = cfg.motors["top"]
    cmd.motors["top"] = (MotorMode.VELOCITY, cfg.task.lift_speed / top.cable_per_rad)
    descent = -velocity.y
    cmd.brakes[side] = latch.update(descent, cfg.task.drop_v_lo, cfg.task.drop_v_hi)
    return cmd


def fine_positioning_cmd(subphase: str, sensors: SensorFrame, cfg: ScenarioConfig,
                         latch: BrakeLatch, velocity: Vec2) -> ActuatorCommand:
    speed = cfg.task.fine_speed
    if subphase == "FineLift":
        return cartesian_velocity_cmd(Vec2(0.0, speed), sensors, cfg, idle_keeper=False)
    if subphase == "FineDrop":
        return cartesian_velocity_cmd(Vec2(0.0, -speed), sensors, cfg, idle_keeper=False)
    if subphase != "FineSwing":
        raise ValueError(f"unknown fine-positioning subphase {subphase!r}")
    side = active_side(sensors.position, cfg.geometry)
    cmd = _passive_all()
    cmd.brakes["top"] = False
    cmd.brakes[side] = latch.update(math.hypot(velocity.x, velocity.y), 0.5 * speed, speed)
    return cmd
