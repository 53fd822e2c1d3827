import math

import numpy as np
import pytest
from conftest import idle_actuators, pendulum_start

from cablesim.actuation import BrakeState, MotorMode, MotorState
from cablesim.config import GRAVITY, MOTORS, default_scenario
from cablesim.plant import (DRIVEN, FREE, LOCKED, TRACKING, Mode, PlantState, SensorModel,
                            cable_kind, initial_state, step)

HIGH = {"geometry.anchor_top.y": 3.0, "task.swing_damping": 0.0}


def swing_energy(s, cfg, lowest):
    m = cfg.payload_mass
    return 0.5 * m * (s.vx ** 2 + s.vy ** 2) + m * GRAVITY * (s.py - lowest)


def test_cable_kinds():
    cfg = default_scenario()
    free, engaged = BrakeState(energized=True, engaged=False), BrakeState()
    assert cable_kind("left", MotorState(), engaged, cfg) == LOCKED
    assert cable_kind("left", MotorState(), free, cfg) == FREE
    # the top winch cannot be back-driven by the payload
    assert cable_kind("top", MotorState(), free, cfg) == LOCKED
    assert cable_kind("left", MotorState(mode=MotorMode.VELOCITY), free, cfg) == DRIVEN
    assert cable_kind("left", MotorState(mode=MotorMode.CURRENT), free, cfg) == TRACKING


@pytest.mark.parametrize("phi0_deg", [5.0, 10.0, 20.0])
def test_undamped_pendulum_conserves_energy_over_a_half_period(phi0_deg):
    cfg = default_scenario().with_overrides(**HIGH)
    length = 1.0
    s = initial_state(cfg, *pendulum_start(cfg, length, math.radians(phi0_deg)))
    motors, brakes = idle_actuators()
    lowest = cfg.geometry.anchor_top.y - length
    e0 = swing_energy(s, cfg, lowest)
    half = round(math.pi * math.sqrt(length / GRAVITY) / cfg.dt)
    for _ in range(3):
        for _ in range(half):
            s = step(s, motors, brakes, cfg)
            assert s.mode is Mode.PENDULUM
        assert swing_energy(s, cfg, lowest) == pytest.approx(e0, rel=1e-3)
    a = cfg.geometry.anchor_top
    assert math.hypot(s.px - a.x, s.py - a.y) == pytest.approx(length, abs=1e-9)


def test_slack_cable_snaps_taut_and_kills_radial_velocity():
    cfg = default_scenario().with_overrides(**HIGH)
    a = cfg.geometry.anchor_top
    s = initial_state(cfg, a.x, a.y - 1.0)
    s.spooled["top"] = 1.02
    motors, brakes = idle_actuators()
    falls = 0
    while True:
        s = step(s, motors, brakes, cfg)
        if s.mode is not Mode.FREE_FALL:
            break
        falls += 1
    # free fall over 20 mm takes ~64 ms
    assert falls * cfg.dt == pytest.approx(math.sqrt(2 * 0.02 / GRAVITY), abs=2 * cfg.dt)
    assert s.mode is Mode.PENDULUM
    assert s.py == pytest.approx(a.y - 1.02, abs=1e-9)
    assert abs(s.vy) < 1e-9


def test_ground_contact_is_inelastic_with_an_impulse():
    cfg = default_scenario()
    hw = cfg.payload_halfwidth
    s = PlantState(0.2, hw + 0.05, spooled={m: 5.0 for m in MOTORS}, taut={m: False for m in MOTORS})
    motors = {m: MotorState() for m in MOTORS}
    brakes = {m: BrakeState(energized=True, engaged=False) for m in MOTORS}
    kinds = {m: FREE for m in MOTORS}
    impulses = []
    for _ in range(200):
        before = s.vy
        s = step(s, motors, brakes, cfg, kinds)
        impulses.append((s.impulse, before))
        if s.ground:
            break
    assert s.ground
    assert s.py == pytest.approx(hw)
    assert s.vy == 0.0
    impulse, v_before = impulses[-1]
    assert impulse == pytest.approx(cfg.payload_mass * (-(v_before - GRAVITY * cfg.dt)), rel=1e-9)


def test_fully_constrained_tensions_balance_the_weight():
    cfg = default_scenario()
    g = cfg.geometry
    s = initial_state(cfg, 0.25, 0.5)
    motors = {m: MotorState() for m in MOTORS}
    brakes = {m: BrakeState() for m in MOTORS}
    s = step(s, motors, brakes, cfg)
    assert s.mode is Mode.FULLY_CONSTRAINED and s.side == "left"
    p = np.array([s.px, s.py])
    u = [np.array([g.anchor(n).x, g.anchor(n).y]) - p for n in ("top", "left")]
    u = [v / np.linalg.norm(v) for v in u]
    expected = np.linalg.solve(np.column_stack(u), np.array([0.0, cfg.weight]))
    assert s.tension["top"] == pytest.approx(expected[0], rel=1e-9)
    assert s.tension["left"] == pytest.approx(expected[1], rel=1e-9)
    assert (s.px, s.py) == pytest.approx((0.25, 0.5), abs=1e-9)


def test_sensor_zero_order_hold_rate():
    cfg = default_scenario()
    sensors = SensorModel(cfg)
    s = initial_state(cfg)
    motors = {m: MotorState() for m in MOTORS}
    fresh = 0
    for k in range(1000):
        s.time = k * cfg.dt
        frame = sensors.sample(s, motors)
        fresh += frame.fresh
        assert frame.timestamp - frame.position_time < 1.0 / cfg.sensor_rate
    assert fresh == 150


def test_sensor_noise_is_seeded():
    cfg = default_scenario()
    s = initial_state(cfg)
    motors = {m: MotorState() for m in MOTORS}
    a = SensorModel(cfg).sample(s, motors).position
    b = SensorModel(cfg).sample(s, motors).position
    assert a == b
    assert abs(a.x - s.px) < 6 * cfg.sensor_noise_sigma
