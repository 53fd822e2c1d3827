"""Fixed-step planar payload dynamics with unilateral cables and contacts.

The payload is a point mass at the centre of a square of half-width ``hw``;
the square only matters for ground and neighbor-box contact. Each tick every
cable is classified by how its spool moves:

* ``locked``   brake engaged, or an unpowered winch whose friction the payload
               weight cannot overcome
* ``driven``   velocity-controlled motor, spool rate from the motor shaft
* ``tracking`` current-controlled motor (tension keeper): spool follows the
               payload both ways
* ``free``     unpowered, back-drivable: pays out when pulled, never reels in

Locked and driven cables are length constraints; the integrator picks the
regime from which of them are taut or would be violated (fully constrained,
pendulum about the top anchor, free fall).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .actuation import BrakeState, MotorMode, MotorState
from .config import GRAVITY, MOTORS, ScenarioConfig, Vec2
from .kinematics import KinematicsError, circle_intersection

TAUT_TOL = 1e-6
GROUND_FRICTION = 0.5

LOCKED, DRIVEN, TRACKING, FREE = "locked", "driven", "tracking", "free"
LENGTH_CONTROLLED = (LOCKED, DRIVEN)


class Mode(enum.Enum):
    FULLY_CONSTRAINED = "fully_constrained"
    PENDULUM = "pendulum"
    FREE_FALL = "free_fall"


class ConstraintFailure(RuntimeError):
    """Cable lengths admit no payload position."""


@dataclass
class PlantState:
    px: float
    py: float
    vx: float = 0.0
    vy: float = 0.0
    spooled: Dict[str, float] = field(default_factory=dict)
    taut: Dict[str, bool] = field(default_factory=dict)
    tension: Dict[str, float] = field(default_factory=lambda: {m: 0.0 for m in MOTORS})
    mode: Mode = Mode.FREE_FALL
    ground: bool = False
    neighbor: bool = False
    time: float = 0.0
    impulse: float = 0.0
    side: Optional[str] = None  # side cable closing the fully constrained pair

    @property
    def p(self) -> Vec2:
        return Vec2(self.px, self.py)

    @property
    def v(self) -> Vec2:
        return Vec2(self.vx, self.vy)

    def copy(self) -> "PlantState":
        return PlantState(self.px, self.py, self.vx, self.vy, dict(self.spooled), dict(self.taut),
                          dict(self.tension), self.mode, self.ground, self.neighbor, self.time,
                          self.impulse, self.side)

    def dump(self) -> str:
        return (f"t={self.time:.6f} p=({self.px:.6f},{self.py:.6f}) v=({self.vx:.6f},{self.vy:.6f}) "
                f"spooled={self.spooled} mode={self.mode.value}")


def initial_state(cfg: ScenarioConfig, x: Optional[float] = None, y: Optional[float] = None) -> PlantState:
    """Payload resting on the ground (or at ``(x, y)``) with every cable just taut."""
    g = cfg.geometry
    px = cfg.start_x if x is None else x
    py = g.ground_y + cfg.payload_halfwidth if y is None else y
    spooled = {m: math.hypot(px - g.anchor(m).x, py - g.anchor(m).y) for m in MOTORS}
    s = PlantState(px, py, spooled=spooled, taut={m: True for m in MOTORS})
    s.ground = py - cfg.payload_halfwidth <= g.ground_y + 1e-12
    return s


def cable_kind(name: str, motor: MotorState, brake: BrakeState, cfg: ScenarioConfig) -> str:
    if brake.engaged:
        return LOCKED
    if motor.mode is MotorMode.VELOCITY:
        return DRIVEN
    if motor.mode is MotorMode.CURRENT:
        return TRACKING
    params = cfg.motors[name]
    if params.static_friction / params.drum_radius >= cfg.weight:
        return LOCKED
    return FREE


def cable_kinds(motors: Mapping[str, MotorState], brakes: Mapping[str, BrakeState],
                cfg: ScenarioConfig) -> Dict[str, str]:
    return {m: cable_kind(m, motors[m], brakes[m], cfg) for m in MOTORS}


def classify_mode(state: PlantState, brakes: Mapping[str, BrakeState],
                  motor_modes: Mapping[str, MotorMode], cfg: ScenarioConfig) -> Mode:
    """Regime implied by tautness and how each cable is held."""
    kinds = {}
    for m in MOTORS:
        kinds[m] = cable_kind(m, MotorState(mode=motor_modes[m]), brakes[m], cfg)
    top_ok = state.taut.get("top", False) and kinds["top"] in LENGTH_CONTROLLED
    if not top_ok:
        return Mode.FREE_FALL
    side = "left" if state.px < cfg.geometry.anchor_top.x else "right"
    if state.taut.get(side, False) and kinds[side] in LENGTH_CONTROLLED:
        return Mode.FULLY_CONSTRAINED
    return Mode.PENDULUM


def _statics(px: float, py: float, a1: Vec2, a2: Vec2, weight: float) -> Tuple[float, float]:
    """Tensions in two cables holding a point weight (unit vectors toward anchors)."""
    ux, uy = a1.x - px, a1.y - py
    n1 = math.hypot(ux, uy)
    ux, uy = ux / n1, uy / n1
    wx, wy = a2.x - px, a2.y - py
    n2 = math.hypot(wx, wy)
    wx, wy = wx / n2, wy / n2
    det = ux * wy - wx * uy
    if abs(det) < 1e-12:
        return weight, 0.0
    t1 = (0.0 * wy - wx * weight) / det
    t2 = (ux * weight - uy * 0.0) / det
    return t1, t2


def step(state: PlantState, motors: Mapping[str, MotorState], brakes: Mapping[str, BrakeState],
         cfg: ScenarioConfig, kinds: Optional[Mapping[str, str]] = None) -> PlantState:
    """Advance the payload by one ``cfg.dt``.

    ``motors`` must already be stepped for this tick so that driven spools use
    the new shaft speeds.
    """
    dt = cfg.dt
    g = cfg.geometry
    m = cfg.payload_mass
    hw = cfg.payload_halfwidth
    if kinds is None:
        kinds = cable_kinds(motors, brakes, cfg)
    anchors = {n: g.anchor(n) for n in MOTORS}
    s = state.copy()
    old_spool = dict(state.spooled)
    px, py, vx, vy = state.px, state.py, state.vx, state.vy

    rates = {}
    for n in MOTORS:
        if kinds[n] == DRIVEN:
            rates[n] = motors[n].speed * cfg.motors[n].cable_per_rad
        elif kinds[n] == LOCKED:
            rates[n] = 0.0
        if n in rates:
            s.spooled[n] = old_spool[n] + rates[n] * dt

    at = anchors["top"]
    d_top = math.hypot(px - at.x, py - at.y)
    top_holds = kinds["top"] in LENGTH_CONTROLLED and d_top >= old_spool["top"] - TAUT_TOL
    mode = Mode.FREE_FALL
    pend = False
    top_tension = 0.0
    if top_holds:
        rx, ry = px - at.x, py - at.y
        phi = math.atan2(rx, -ry)
        c, sn = math.cos(phi), math.sin(phi)
        L0 = d_top
        phid = (vx * c + vy * sn) / L0
        L = s.spooled["top"]
        Ld = rates["top"]
        top_tension = m * (GRAVITY * c + L0 * phid * phid)
        if top_tension >= 0.0:
            pend = True
            phidd = -(GRAVITY / L0) * sn - cfg.task.swing_damping * phid - 2.0 * Ld * phid / L0
            phid += phidd * dt
            phi += phid * dt
            c, sn = math.cos(phi), math.sin(phi)
            nx, ny = at.x + L * sn, at.y - L * c
            nvx, nvy = Ld * sn + L * phid * c, -Ld * c + L * phid * sn
            mode = Mode.PENDULUM
    if not pend:
        nvx, nvy = vx, vy - GRAVITY * dt
        nx, ny = px + nvx * dt, py + nvy * dt

    def violation(name: str, x: float, y: float) -> float:
        if kinds[name] not in LENGTH_CONTROLLED:
            return -1.0
        a = anchors[name]
        return math.hypot(x - a.x, y - a.y) - s.spooled[name]

    side = None
    if pend:
        worst = TAUT_TOL
        for n in ("left", "right"):
            v = violation(n, nx, ny)
            if v > worst:
                worst, side = v, n
    else:
        viol = {n: violation(n, nx, ny) for n in MOTORS}
        hit = [n for n in MOTORS if viol[n] > TAUT_TOL]
        sides = [n for n in hit if n != "top"]
        if "top" in hit and sides:
            side = max(sides, key=lambda n: viol[n])
        elif hit:
            n = max(hit, key=lambda k: viol[k])
            a = anchors[n]
            dx, dy = nx - a.x, ny - a.y
            d = math.hypot(dx, dy)
            ux, uy = dx / d, dy / d
            nx, ny = a.x + ux * s.spooled[n], a.y + uy * s.spooled[n]
            vr = nvx * ux + nvy * uy
            if vr > 0.0:
                nvx -= vr * ux
                nvy -= vr * uy
            if n == "top":
                mode = Mode.PENDULUM
                for k in ("left", "right"):
                    if violation(k, nx, ny) > TAUT_TOL:
                        side = k
            elif violation("top", nx, ny) > TAUT_TOL:
                side = n

    if side is not None:
        try:
            q = circle_intersection(at, s.spooled["top"], anchors[side], s.spooled[side], Vec2(nx, ny))
        except KinematicsError as exc:
            raise ConstraintFailure(f"{exc}; state: {state.dump()}") from None
        nx, ny = q.x, q.y
        nvx, nvy = (nx - px) / dt, (ny - py) / dt
        mode = Mode.FULLY_CONSTRAINED

    # contacts
    impulse = 0.0
    e = cfg.task.restitution
    ground = False
    if ny - hw <= g.ground_y:
        ny = g.ground_y + hw
        ground = True
        if nvy < 0.0:
            dvy = -(1.0 + e) * nvy
            nvy = -e * nvy
            lim = GROUND_FRICTION * dvy
            if abs(nvx) <= lim:
                dvx = -nvx
                nvx = 0.0
            else:
                dvx = -math.copysign(lim, nvx)
                nvx += dvx
            impulse += m * math.hypot(dvx, dvy)
    box = g.neighbor
    neighbor = False
    ox = min(nx + hw - box.x, box.right - (nx - hw))
    oy = min(ny + hw - box.y, box.top - (ny - hw))
    if ox > -1e-9 and oy > -1e-9:
        neighbor = True
        if ox > 0.0 and oy > 0.0:
            if ox < oy:
                sign = 1.0 if nx > box.x + 0.5 * box.width else -1.0
                nx += sign * ox
                vn = nvx * sign
                if vn < 0.0:
                    dv = -(1.0 + e) * vn
                    nvx += sign * dv
                    impulse += m * dv
            else:
                ny += oy
                if nvy < 0.0:
                    dv = -(1.0 + e) * nvy
                    nvy += dv
                    impulse += m * dv

    # spools that follow the payload
    for n in MOTORS:
        a = anchors[n]
        d = math.hypot(nx - a.x, ny - a.y)
        if kinds[n] == TRACKING:
            s.spooled[n] = d
        elif kinds[n] == FREE:
            s.spooled[n] = max(old_spool[n], d)
        s.taut[n] = d >= s.spooled[n] - TAUT_TOL

    # tensions (diagnostic and motor load)
    tension = {n: 0.0 for n in MOTORS}
    if not ground:
        if mode is Mode.FULLY_CONSTRAINED:
            t1, t2 = _statics(nx, ny, at, anchors[side], cfg.weight)
            tension["top"] = max(t1, 0.0)
            tension[side] = max(t2, 0.0)
        elif mode is Mode.PENDULUM and s.taut["top"]:
            c = (at.y - ny) / max(s.spooled["top"], 1e-12)
            L = s.spooled["top"]
            vt2 = nvx * nvx + nvy * nvy
            tension["top"] = max(m * GRAVITY * c + m * vt2 / L, 0.0)
    for n in MOTORS:
        if kinds[n] == TRACKING and s.taut[n]:
            p = cfg.motors[n]
            tension[n] = max(tension[n], abs(p.kt * motors[n].current) / p.cable_per_rad)

    s.px, s.py, s.vx, s.vy = nx, ny, nvx, nvy
    s.tension = tension
    s.mode = mode
    s.side = side
    s.ground = ground
    s.neighbor = neighbor
    s.impulse = impulse
    s.time = state.time + dt
    return s


def spool_rates(before: PlantState, after: PlantState, dt: float) -> Dict[str, float]:
    return {n: (after.spooled[n] - before.spooled[n]) / dt for n in MOTORS}


@dataclass(frozen=True)
class SensorFrame:
    position: Vec2
    position_time: float
    fresh: bool
    encoder_lengths: Dict[str, float]
    motor_currents: Dict[str, float]
    brakes_engaged: Dict[str, bool]
    timestamp: float


class SensorModel:
    """Camera-like position with zero-order hold plus exact encoders and currents.

    The top-motor current readback carries a spike proportional to any contact
    impulse in the tick, a stand-in for the drive-level impact signature.
    """

    def __init__(self, cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
        self.period = 1.0 / cfg.sensor_rate
        self.count = 0
        self.held: Optional[Vec2] = None
        self.held_time = -math.inf

    def sample(self, state: PlantState, motors: Mapping[str, MotorState],
               brakes: Optional[Mapping[str, BrakeState]] = None) -> SensorFrame:
        fresh = False
        if state.time + 1e-9 >= self.count * self.period:
            sigma = self.cfg.sensor_noise_sigma
            if sigma > 0.0:
                nx, ny = self.rng.normal(0.0, sigma, 2)
            else:
                nx = ny = 0.0
            self.held = Vec2(state.px + float(nx), state.py + float(ny))
            self.held_time = state.time
            self.count = int(math.floor(state.time / self.period + 1e-9)) + 1
            fresh = True
        top = self.cfg.motors["top"]
        spike = state.impulse / self.cfg.dt * top.cable_per_rad / top.kt
        currents = {n: motors[n].current for n in MOTORS}
        currents["top"] += spike
        engaged = {n: (brakes[n].engaged if brakes is not None else False) for n in MOTORS}
        return SensorFrame(self.held, self.held_time, fresh, dict(state.spooled), currents,
                           engaged, state.time)


def sample_sensors(state: PlantState, motors: Mapping[str, MotorState],
                   rng: SensorModel) -> SensorFrame:
    return rng.sample(state, motors)
