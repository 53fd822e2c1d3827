"""Discrete supervisor: task phases, event monitors and the transition table.

Each event is owned by exactly one phase and its monitor is only evaluated
while that phase is active. Events are reported with the timestamp of the
sensor frame that triggered them.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

from .config import ScenarioConfig, Vec2
from .kinematics import constrained_arc_state
from .plant import SensorFrame

SWING_MIN_ARC = math.radians(5.0)
REVERSAL_LAG = 2  # compare x_k with x_(k-2)
LPF_CUTOFF = 20.0
SPIKE_WINDOW = 0.5
SPIKE_BLANKING = 0.1
STALL_WINDOW = 0.1
STALL_SPEED = 0.01
TAUT_SLACK = 0.005
VELOCITY_SAMPLES = 8


class Phase(enum.Enum):
    INIT = "Init"
    LIFTING = "Lifting"
    SWING = "Swing"
    HOLD = "Hold"
    DROP = "Drop"
    FINE_LIFT = "FineLift"
    FINE_SWING = "FineSwing"
    FINE_DROP = "FineDrop"
    DONE = "Done"
    FAULT = "Fault"


# event id -> (phase that owns it, phase it leads to)
TRANSITIONS: Dict[int, Tuple[Phase, Phase]] = {
    1: (Phase.INIT, Phase.LIFTING),
    2: (Phase.LIFTING, Phase.SWING),
    3: (Phase.SWING, Phase.HOLD),
    4: (Phase.DROP, Phase.FINE_LIFT),
    5: (Phase.FINE_LIFT, Phase.FINE_SWING),
    6: (Phase.FINE_SWING, Phase.FINE_DROP),
    7: (Phase.FINE_DROP, Phase.DONE),
}
OWNER = {owner: eid for eid, (owner, _) in TRANSITIONS.items()}

# energy report columns: a phase belongs to the interval between two events
PHASE_COLUMN = {
    Phase.LIFTING: "1-2",
    Phase.SWING: "2-3",
    Phase.HOLD: "3-4",
    Phase.DROP: "3-4",
    Phase.FINE_LIFT: "4-5",
    Phase.FINE_SWING: "5-6",
    Phase.FINE_DROP: "6-7",
}
EVENT_GLYPHS = {1: "①", 2: "②", 3: "③", 4: "④", 5: "⑤", 6: "⑥", 7: "⑦"}


class FsmFault(RuntimeError):
    pass


@dataclass(frozen=True)
class MonitorEvent:
    id: int
    t: float
    value: float = 0.0
    detail: str = ""

    @property
    def glyph(self) -> str:
        return EVENT_GLYPHS[self.id]


def step_fsm(phase: Phase, events: Sequence[MonitorEvent], settled: bool = False) -> Phase:
    """Next phase given the events raised this tick.

    ``settled`` ends the Hold dwell. Any event not owned by ``phase`` is a
    fault.
    """
    if phase is Phase.HOLD and settled and not events:
        return Phase.DROP
    for ev in events:
        owner, target = TRANSITIONS.get(ev.id, (None, None))
        if owner is not phase:
            raise FsmFault(f"event {ev.id} at t={ev.t:.3f} is not expected in phase {phase.value}")
        phase = target
    return phase


class PositionTrack:
    """Recent camera fixes; least-squares velocity over the newest samples."""

    def __init__(self, maxlen: int = 64):
        self.samples: Deque[Tuple[float, float, float]] = deque(maxlen=maxlen)
        self._cache: Dict[int, Vec2] = {}

    def push(self, frame: SensorFrame) -> bool:
        if not frame.fresh:
            return False
        p = frame.position
        self.samples.append((frame.position_time, p.x, p.y))
        self._cache.clear()
        return True

    def velocity(self, n: int = VELOCITY_SAMPLES) -> Vec2:
        if n not in self._cache:
            self._cache[n] = self._fit(n)
        return self._cache[n]

    def _fit(self, n: int) -> Vec2:
        pts = list(self.samples)[-n:]
        if len(pts) < 2:
            return Vec2(0.0, 0.0)
        tm = sum(p[0] for p in pts) / len(pts)
        xm = sum(p[1] for p in pts) / len(pts)
        ym = sum(p[2] for p in pts) / len(pts)
        den = sum((p[0] - tm) ** 2 for p in pts)
        if den <= 0.0:
            return Vec2(0.0, 0.0)
        return Vec2(sum((p[0] - tm) * (p[1] - xm) for p in pts) / den,
                    sum((p[0] - tm) * (p[2] - ym) for p in pts) / den)

    def window(self, span: float) -> List[Tuple[float, float, float]]:
        if not self.samples:
            return []
        t_end = self.samples[-1][0]
        return [s for s in self.samples if s[0] >= t_end - span - 1e-9]


@dataclass
class _SpikeDetector:
    """Readback current against a low-passed copy of the drive command."""

    dt: float
    threshold: float
    filtered: Optional[float] = None
    history: Deque[float] = field(default_factory=deque)
    _s1: float = 0.0
    _s2: float = 0.0

    def reset(self) -> None:
        self.filtered = None
        self.history.clear()
        self._s1 = self._s2 = 0.0

    def update(self, commanded: float, readback: float) -> Tuple[bool, float]:
        alpha = 1.0 - math.exp(-2.0 * math.pi * LPF_CUTOFF * self.dt)
        self.filtered = commanded if self.filtered is None else self.filtered + alpha * (commanded - self.filtered)
        residual = readback - self.filtered
        n = len(self.history)
        std = math.sqrt(max(self._s2 - self._s1 * self._s1 / n, 0.0) / (n - 1)) if n > 1 else 0.0
        fired = abs(residual) > max(self.threshold, 2.0 * std)
        self.history.append(residual)
        self._s1 += residual
        self._s2 += residual * residual
        if len(self.history) > max(1, int(round(SPIKE_WINDOW / self.dt))):
            old = self.history.popleft()
            self._s1 -= old
            self._s2 -= old * old
        return fired, residual


class MonitorBank:
    """Predicates for the seven events, evaluated for the active phase only."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.track = PositionTrack()
        self.spike = _SpikeDetector(cfg.dt, cfg.task.impact_current_threshold)
        self.phase: Optional[Phase] = None
        self.phase_start = 0.0
        self.swing_phi0: Optional[float] = None
        self.swing_dir = 0.0
        self.released_since: Optional[float] = None

    def _enter(self, phase: Phase, t: float) -> None:
        self.phase = phase
        self.phase_start = t
        self.spike.reset()
        self.swing_phi0 = None
        self.released_since = None

    def evaluate(self, frame: SensorFrame, phase: Phase, commanded_top_current: float = 0.0,
                 side_brake_engaged: Optional[bool] = None) -> List[MonitorEvent]:
        t = frame.timestamp
        if phase is not self.phase:
            self._enter(phase, t)
        fresh = self.track.push(frame)
        task = self.cfg.task
        g = self.cfg.geometry
        if phase is Phase.INIT:
            if self._fresh(frame) and self._taut(frame, ("top", "left" if frame.position.x < g.anchor_top.x else "right")):
                return [MonitorEvent(1, t)]
        elif phase is Phase.LIFTING:
            if fresh and frame.position.y >= task.h_d:
                return [MonitorEvent(2, t, frame.position.y)]
        elif phase is Phase.SWING:
            if fresh:
                return self._reversal(frame)
        elif phase in (Phase.DROP, Phase.FINE_DROP):
            fired, residual = self.spike.update(commanded_top_current, frame.motor_currents["top"])
            if fired and t - self.phase_start >= SPIKE_BLANKING:
                return [MonitorEvent(OWNER[phase], t, residual, "current spike")]
        elif phase is Phase.FINE_LIFT:
            if frame.encoder_lengths["top"] <= task.l2_threshold:
                return [MonitorEvent(5, t, frame.encoder_lengths["top"])]
        elif phase is Phase.FINE_SWING:
            fired, residual = self.spike.update(commanded_top_current, frame.motor_currents["top"])
            if fired and t - self.phase_start >= SPIKE_BLANKING:
                return [MonitorEvent(6, t, residual, "current spike")]
            return self._stall(frame, side_brake_engaged)
        return []

    def _fresh(self, frame: SensorFrame) -> bool:
        return frame.timestamp - frame.position_time <= 2.0 / self.cfg.sensor_rate

    def _taut(self, frame: SensorFrame, names: Sequence[str]) -> bool:
        p = frame.position
        for n in names:
            a = self.cfg.geometry.anchor(n)
            if math.hypot(p.x - a.x, p.y - a.y) < frame.encoder_lengths[n] - TAUT_SLACK:
                return False
        return True

    def _reversal(self, frame: SensorFrame) -> List[MonitorEvent]:
        g = self.cfg.geometry
        _, phi, _ = constrained_arc_state(frame.position, g)
        if self.swing_phi0 is None:
            self.swing_phi0 = phi
            self.swing_dir = 1.0 if frame.position.x < g.anchor_top.x else -1.0
            return []
        pts = list(self.track.samples)
        if abs(phi - self.swing_phi0) < SWING_MIN_ARC or len(pts) <= REVERSAL_LAG:
            return []
        dx = pts[-1][1] - pts[-1 - REVERSAL_LAG][1]
        if dx * self.swing_dir < 0.0:
            return [MonitorEvent(3, frame.position_time, frame.position.x, "direction reversal")]
        return []

    def _stall(self, frame: SensorFrame, side_brake_engaged: Optional[bool]) -> List[MonitorEvent]:
        t = frame.timestamp
        if side_brake_engaged:
            self.released_since = None
            return []
        if self.released_since is None:
            self.released_since = t
        if t - self.released_since < STALL_WINDOW:
            return []
        pts = self.track.window(STALL_WINDOW)
        if len(pts) < 3 or pts[-1][0] - pts[0][0] < 0.8 * STALL_WINDOW:
            return []
        tm = sum(p[0] for p in pts) / len(pts)
        den = sum((p[0] - tm) ** 2 for p in pts)
        xm = sum(p[1] for p in pts) / len(pts)
        ym = sum(p[2] for p in pts) / len(pts)
        vx = sum((p[0] - tm) * (p[1] - xm) for p in pts) / den
        vy = sum((p[0] - tm) * (p[2] - ym) for p in pts) / den
        speed = math.hypot(vx, vy)
        if speed < STALL_SPEED:
            return [MonitorEvent(6, t, speed, "stall")]
        return []
