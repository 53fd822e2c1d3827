"""Motor electro-mechanics, normally-on brakes and the energy ledger.

Sign conventions: shaft speed and current are positive in the cable pay-out
direction, and cable tension loads the shaft with ``+n r T``. The drives are
not regenerative by default, so the ledger integrates ``max(V I, 0)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .config import MOTORS, BrakeParams, MotorParams

SETPOINT_ACCEL = 1.0  # m/s^2 of cable acceleration allowed on velocity setpoints
_STICK_SPEED = 1e-6


class MotorMode(enum.Enum):
    PASSIVE = "passive"
    VELOCITY = "velocity"
    CURRENT = "current"


@dataclass
class MotorState:
    angle: float = 0.0
    speed: float = 0.0
    current: float = 0.0
    voltage: float = 0.0
    mode: MotorMode = MotorMode.PASSIVE
    setpoint: float = 0.0
    # internal drive state
    ramped: float = 0.0
    integral: float = 0.0

    @property
    def power(self) -> float:
        return electrical_power(self.voltage, self.current)


@dataclass
class BrakeState:
    energized: bool = False
    engaged: bool = True
    transition_deadline: Optional[float] = None
    clock: float = 0.0


def electrical_power(voltage: float, current: float) -> float:
    return voltage * current


def copper_loss(resistance: float, current: float) -> float:
    return resistance * current * current


def friction_torque(params: MotorParams) -> float:
    """Static friction reflected to the motor shaft."""
    return params.gear_ratio * params.static_friction


def motor_step(state: MotorState, params: MotorParams, load_torque_at_drum: float,
               dt: float, brake_engaged: bool = False) -> MotorState:
    """Advance one motor by ``dt``.

    ``load_torque_at_drum`` is the cable tension torque ``T r`` (pay-out
    positive). Passive and current-controlled motors whose shaft is moved by
    the cable get their speed from the plant via ``follow_cable``.
    """
    s = MotorState(**vars(state))
    n = params.gear_ratio
    if s.mode is MotorMode.PASSIVE:
        s.current = 0.0
        s.voltage = 0.0
        s.integral = 0.0
        s.ramped = s.speed
        if brake_engaged:
            s.speed = 0.0
        return s

    if s.mode is MotorMode.CURRENT:
        s.current = max(-params.max_current, min(params.max_current, s.setpoint))
        s.integral = 0.0
        s.ramped = s.speed
        if brake_engaged:
            s.speed = 0.0
        s.voltage = params.resistance * s.current + params.ke * s.speed
        return s

    if brake_engaged:
        # the drive waits for the brake to open instead of winding up against it
        s.current = 0.0
        s.voltage = 0.0
        s.integral = 0.0
        s.ramped = 0.0
        s.speed = 0.0
        return s

    # velocity mode: slew-limited setpoint, PI loop, rigid shaft with friction
    kp, ki = params.gains()
    max_step = SETPOINT_ACCEL / params.cable_per_rad * dt
    target = max(-params.max_speed, min(params.max_speed, s.setpoint))
    s.ramped += max(-max_step, min(max_step, target - s.ramped))
    err = s.ramped - s.speed
    integral = s.integral + err * dt
    current = kp * err + ki * integral
    if abs(current) > params.max_current:
        current = math.copysign(params.max_current, current)
    else:
        s.integral = integral
    s.current = current

    drive = params.kt * current + n * load_torque_at_drum
    stat = friction_torque(params)
    if abs(s.speed) < _STICK_SPEED and abs(drive) <= stat:
        s.speed = 0.0
    else:
        direction = s.speed if abs(s.speed) >= _STICK_SPEED else drive
        fric = math.copysign(stat, direction) + n * n * params.viscous_friction * s.speed
        new_speed = s.speed + (drive - fric) / params.inertia * dt
        if s.speed != 0.0 and new_speed * s.speed < 0.0 and abs(drive) <= stat:
            new_speed = 0.0
        s.speed = new_speed
    s.angle += s.speed * dt
    s.voltage = params.resistance * s.current + params.ke * s.speed
    return s


def follow_cable(state: MotorState, params: MotorParams, cable_rate: float, dt: float) -> None:
    """Impose the shaft speed produced by the cable (passive or current mode)."""
    state.speed = cable_rate / params.cable_per_rad
    state.angle += state.speed * dt
    if state.mode is MotorMode.CURRENT:
        state.voltage = params.resistance * state.current + params.ke * state.speed


def brake_step(state: BrakeState, command_energized: bool, params: BrakeParams,
               dt: float) -> Tuple[BrakeState, float]:
    """Normally-on brake: engaged unless energized, switching after a delay."""
    s = BrakeState(**vars(state))
    s.clock += dt
    if command_energized != s.energized:
        s.energized = command_energized
        s.transition_deadline = s.clock - dt + params.switch_delay
    if s.transition_deadline is not None and s.clock >= s.transition_deadline - 1e-12:
        s.engaged = not s.energized
        s.transition_deadline = None
    return s, (params.power * dt if s.energized else 0.0)


@dataclass
class EnergyLedger:
    """Trapezoidal motor-energy integrals and brake on-time, sliced by phase."""

    allow_regen: bool = False
    motor_energy: Dict[str, float] = field(default_factory=lambda: {m: 0.0 for m in MOTORS})
    brake_ticks: Dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOTORS})
    brake_power: Dict[str, float] = field(default_factory=lambda: {m: 0.0 for m in MOTORS})
    phase_marks: List[Tuple[str, float]] = field(default_factory=list)
    phase_motor: Dict[str, Dict[str, float]] = field(default_factory=dict)
    phase_brake_ticks: Dict[str, Dict[str, int]] = field(default_factory=dict)
    dt: float = 0.0
    time: float = 0.0
    _last_power: Optional[Dict[str, float]] = None

    def clamp(self, power: float) -> float:
        return power if self.allow_regen else max(power, 0.0)

    def brake_energy(self, name: str) -> float:
        return self.brake_power[name] * self.brake_ticks[name] * self.dt

    def total(self) -> float:
        return sum(self.motor_energy.values()) + sum(self.brake_energy(m) for m in MOTORS)

    def seed(self, per_device_power: Sequence[float]) -> None:
        self._last_power = {m: self.clamp(p) for m, p in zip(MOTORS, per_device_power)}

    def mark(self, phase: str, t: float) -> None:
        if not self.phase_marks or self.phase_marks[-1][0] != phase:
            self.phase_marks.append((phase, t))


def integrate(ledger: EnergyLedger, per_device_power: Sequence[float], dt: float, phase: str,
              brakes_energized: Sequence[bool] = (False, False, False)) -> EnergyLedger:
    """Accumulate one ``dt`` of motor power (trapezoid) and brake on-time.

    ``per_device_power`` is the sample at the end of the step; the sample at
    its start is the previous call's (or the ``seed`` value). Mutates and
    returns ``ledger``.
    """
    ledger.dt = dt
    ledger.mark(phase, ledger.time)
    now = {m: ledger.clamp(p) for m, p in zip(MOTORS, per_device_power)}
    prev = ledger._last_power if ledger._last_power is not None else now
    pm = ledger.phase_motor.setdefault(phase, {m: 0.0 for m in MOTORS})
    pb = ledger.phase_brake_ticks.setdefault(phase, {m: 0 for m in MOTORS})
    for m, on in zip(MOTORS, brakes_energized):
        inc = 0.5 * (prev[m] + now[m]) * dt
        ledger.motor_energy[m] += inc
        pm[m] += inc
        if on:
            ledger.brake_ticks[m] += 1
            pb[m] += 1
    ledger._last_power = now
    ledger.time += dt
    return ledger
