import math

import pytest
from conftest import idle_actuators, pendulum_start

from cablesim.actuation import BrakeState, MotorState
from cablesim.config import GRAVITY, MOTORS, Vec2, default_scenario
from cablesim.plant import FREE, PlantState, SensorFrame, SensorModel, initial_state, step
from cablesim.supervisor import (EVENT_GLYPHS, STALL_WINDOW, FsmFault, MonitorBank, MonitorEvent,
                                 Phase, step_fsm)


def ev(i, t=0.0):
    return MonitorEvent(i, t)


def still_frame(cfg, x, y, t, fresh=True, top_length=None, top_current=0.0):
    g = cfg.geometry
    lengths = {m: math.hypot(x - g.anchor(m).x, y - g.anchor(m).y) for m in MOTORS}
    if top_length is not None:
        lengths["top"] = top_length
    currents = {"top": top_current, "left": 0.0, "right": 0.0}
    return SensorFrame(Vec2(x, y), t, fresh, lengths, currents,
                       {m: False for m in MOTORS}, t)


@pytest.mark.parametrize("phase, eid, target", [
    (Phase.INIT, 1, Phase.LIFTING),
    (Phase.LIFTING, 2, Phase.SWING),
    (Phase.SWING, 3, Phase.HOLD),
    (Phase.DROP, 4, Phase.FINE_LIFT),
    (Phase.FINE_LIFT, 5, Phase.FINE_SWING),
    (Phase.FINE_SWING, 6, Phase.FINE_DROP),
    (Phase.FINE_DROP, 7, Phase.DONE),
])
def test_each_event_advances_its_owner(phase, eid, target):
    assert step_fsm(phase, [ev(eid)]) is target


def test_hold_dwells_until_settled():
    assert step_fsm(Phase.HOLD, []) is Phase.HOLD
    assert step_fsm(Phase.HOLD, [], settled=True) is Phase.DROP
    assert step_fsm(Phase.SWING, []) is Phase.SWING


@pytest.mark.parametrize("phase, eid", [(Phase.INIT, 2), (Phase.SWING, 4), (Phase.HOLD, 3),
                                        (Phase.DONE, 7), (Phase.DROP, 9)])
def test_unexpected_event_is_a_fault(phase, eid):
    with pytest.raises(FsmFault):
        step_fsm(phase, [ev(eid, 1.5)])


def test_event_glyph():
    assert ev(4).glyph == "④" == EVENT_GLYPHS[4]


def test_start_needs_fresh_fix_and_taut_cables():
    cfg = default_scenario()
    bank = MonitorBank(cfg)
    assert bank.evaluate(still_frame(cfg, 0.2, 0.1, 0.0), Phase.INIT)[0].id == 1
    bank = MonitorBank(cfg)
    slack = still_frame(cfg, 0.2, 0.1, 0.0, top_length=2.0)
    assert bank.evaluate(slack, Phase.INIT) == []
    stale = SensorFrame(Vec2(0.2, 0.1), 0.0, False, slack.encoder_lengths | {"top": 1.2},
                        slack.motor_currents, slack.brakes_engaged, 1.0)
    assert bank.evaluate(stale, Phase.INIT) == []


def test_height_event_only_on_a_fresh_frame_and_only_while_lifting():
    cfg = default_scenario()
    h = cfg.task.h_d
    bank = MonitorBank(cfg)
    assert bank.evaluate(still_frame(cfg, 0.2, h - 0.01, 0.0), Phase.LIFTING) == []
    assert bank.evaluate(still_frame(cfg, 0.2, h + 0.01, 0.001, fresh=False), Phase.LIFTING) == []
    assert bank.evaluate(still_frame(cfg, 0.2, h + 0.01, 0.007), Phase.LIFTING)[0].id == 2
    other = MonitorBank(cfg)
    assert other.evaluate(still_frame(cfg, 0.2, h + 0.01, 0.0), Phase.HOLD) == []


def test_top_encoder_threshold_event():
    cfg = default_scenario()
    bank = MonitorBank(cfg)
    thr = cfg.task.l2_threshold
    assert bank.evaluate(still_frame(cfg, 0.7, 0.1, 0.0, top_length=thr + 1e-3), Phase.FINE_LIFT) == []
    e = bank.evaluate(still_frame(cfg, 0.7, 0.1, 0.001, top_length=thr), Phase.FINE_LIFT)
    assert [x.id for x in e] == [5]


def test_reversal_after_half_a_period():
    cfg = default_scenario().with_overrides(**{"geometry.anchor_top.y": 3.0, "task.swing_damping": 0.0,
                                               "sensor.noise_sigma": 0.0})
    length, phi0 = 1.0, math.radians(-10.0)
    s = initial_state(cfg, *pendulum_start(cfg, length, phi0))
    motors, brakes = idle_actuators()
    sensors = SensorModel(cfg)
    bank = MonitorBank(cfg)
    events = []
    while not events and s.time < 3.0:
        events = bank.evaluate(sensors.sample(s, motors, brakes), Phase.SWING)
        s = step(s, motors, brakes, cfg)
    assert [e.id for e in events] == [3]
    half = math.pi * math.sqrt(length / GRAVITY)
    assert events[0].t == pytest.approx(half, rel=0.02)
    # the reversal is seen on the far side of the anchor
    assert events[0].value > cfg.geometry.anchor_top.x


def test_contact_event_within_two_ticks_of_touchdown():
    cfg = default_scenario().with_overrides(**{"sensor.noise_sigma": 0.0})
    hw = cfg.payload_halfwidth
    s = PlantState(0.8, hw + 0.15, spooled={m: 5.0 for m in MOTORS}, taut={m: False for m in MOTORS})
    motors = {m: MotorState() for m in MOTORS}
    brakes = {m: BrakeState(energized=True, engaged=False) for m in MOTORS}
    kinds = {m: FREE for m in MOTORS}
    sensors = SensorModel(cfg)
    bank = MonitorBank(cfg)
    touchdown = None
    fired = None
    while fired is None and s.time < 1.0:
        events = bank.evaluate(sensors.sample(s, motors, brakes), Phase.DROP)
        if events:
            fired = events[0]
            break
        s = step(s, motors, brakes, cfg, kinds)
        if touchdown is None and s.impulse > 0.0:
            touchdown = s.time
    assert touchdown is not None and fired is not None
    assert fired.id == 4
    assert 0.0 <= fired.t - touchdown <= 2 * cfg.dt


def test_contact_monitor_ignores_a_quiet_current():
    cfg = default_scenario()
    bank = MonitorBank(cfg)
    for k in range(500):
        assert bank.evaluate(still_frame(cfg, 0.8, 0.4, k * cfg.dt, top_current=1.0), Phase.DROP, 1.0) == []


def test_stall_after_the_side_brake_is_released():
    cfg = default_scenario()
    bank = MonitorBank(cfg)
    period = 1.0 / cfg.sensor_rate
    fired = None
    for k in range(400):
        t = k * cfg.dt
        fresh = abs(t / period - round(t / period)) < 1e-6
        engaged = t < 0.2
        events = bank.evaluate(still_frame(cfg, 0.7, 0.15, t, fresh), Phase.FINE_SWING, 0.0, engaged)
        if events:
            fired = events[0]
            break
    assert fired is not None and fired.id == 6 and fired.detail == "stall"
    assert fired.t == pytest.approx(0.2 + STALL_WINDOW, abs=0.01)


def test_nominal_run_raises_every_event_once_in_order(proposed_log):
    assert proposed_log.event_ids() == [1, 2, 3, 4, 5, 6, 7]
    times = [e.t for e in proposed_log.events]
    assert times == sorted(times)
    assert not proposed_log.failed
