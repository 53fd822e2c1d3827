"""Scenario configuration: value types, defaults and the key = value file format.

Every physical quantity is SI. The default scenario mirrors the desk-scale rig:
a 14 kg payload in a 1 x 1 m vertical workspace, a 750 W hoist (gear 70:1,
4.2 cm drum) and two 188 W side motors (8 x 30/16 reduction onto an 8 mm shaft).

Gear ratios are stored as drum revolutions per motor revolution, so the hoist
nameplate ratio of 70 becomes ``n = 1/70`` and the side reduction
``8 * 30/16 = 15`` becomes ``n = 1/15``. The file format accepts ``a/b``
fractions so those values can be written as they appear on the nameplate.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

MOTORS = ("top", "left", "right")
GRAVITY = 9.81


class ScenarioError(ValueError):
    """Raised for malformed scenario files or invariant violations."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its lower-left corner and size."""

    x: float
    y: float
    width: float
    height: float

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def top(self) -> float:
        return self.y + self.height

    def contains(self, p: Vec2) -> bool:
        return self.x < p.x < self.right and self.y < p.y < self.top


@dataclass(frozen=True)
class RobotGeometry:
    anchor_top: Vec2
    anchor_left: Vec2
    anchor_right: Vec2
    ground_y: float
    neighbor: Rect
    target_x: float
    workspace: Rect = Rect(0.0, 0.0, 1.0, 1.0)

    def anchor(self, name: str) -> Vec2:
        return {"top": self.anchor_top, "left": self.anchor_left, "right": self.anchor_right}[name]


@dataclass(frozen=True)
class MotorParams:
    rated_power: float
    gear_ratio: float  # drum revs per motor rev
    drum_radius: float
    resistance: float
    kt: float
    ke: float
    static_friction: float  # N m at the drum
    viscous_friction: float  # N m s / rad at the drum
    max_speed: float  # rad/s at the motor
    max_current: float
    inertia: float = 1e-4  # kg m^2 reflected to the motor shaft
    vel_kp: float = 0.0  # A per rad/s; 0 selects a 200 rad/s loop bandwidth
    vel_ki: float = 0.0

    @property
    def cable_per_rad(self) -> float:
        """Cable metres per motor radian (n * r)."""
        return self.gear_ratio * self.drum_radius

    def gains(self) -> Tuple[float, float]:
        kp = self.vel_kp or self.inertia * 200.0 / self.kt
        ki = self.vel_ki or kp * 50.0
        return kp, ki


@dataclass(frozen=True)
class BrakeParams:
    hold_torque: float
    power: float
    switch_delay: float = 0.05


@dataclass(frozen=True)
class TaskParams:
    h_d: float
    l2_threshold: float
    lift_speed: float
    fine_speed: float
    drop_v_lo: float
    drop_v_hi: float
    keeper_current: float
    impact_current_threshold: float
    swing_damping: float
    restitution: float
    hold_settle: float = 0.5
    allow_regen: bool = False


@dataclass(frozen=True)
class PtpParams:
    kp: float = 2.0
    v_max: float = 0.2
    a_max: float = 0.5
    drop_clearance: float = 0.03


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: RobotGeometry
    motors: Dict[str, MotorParams]
    brakes: Dict[str, BrakeParams]
    payload_mass: float
    payload_halfwidth: float
    start_x: float
    dt: float
    rng_seed: int
    task: TaskParams
    sensor_rate: float
    sensor_noise_sigma: float
    ptp: PtpParams = field(default_factory=PtpParams)

    @property
    def weight(self) -> float:
        return self.payload_mass * GRAVITY

    def with_overrides(self, **flat: Union[float, int, bool]) -> "ScenarioConfig":
        """Return a copy with dotted-key overrides applied and validated."""
        values = to_flat(self)
        for key, value in flat.items():
            key = key.replace("__", ".")
            if key not in values:
                raise ScenarioError(key, "unknown key")
            values[key] = value
        return from_flat(values)

    def digest(self) -> str:
        return hashlib.sha256(dump_scenario(self).encode()).hexdigest()[:16]


# -- flat key table -------------------------------------------------------------

_MOTOR_FIELDS = {
    "rated_power": "rated_power",
    "gear_ratio": "gear_ratio",
    "drum_radius": "drum_radius",
    "resistance": "resistance",
    "kt": "kt",
    "ke": "ke",
    "static_friction": "static_friction",
    "viscous_friction": "viscous_friction",
    "max_speed": "max_speed",
    "max_current": "max_current",
    "inertia": "inertia",
    "vel_kp": "vel_kp",
    "vel_ki": "vel_ki",
}
_BRAKE_FIELDS = ("hold_torque", "power", "switch_delay")
_TASK_FIELDS = {
    "task.h_d": "h_d",
    "task.l2_threshold": "l2_threshold",
    "task.lift_speed": "lift_speed",
    "task.fine_speed": "fine_speed",
    "task.drop_v_lo": "drop_v_lo",
    "task.drop_v_hi": "drop_v_hi",
    "task.keeper_current": "keeper_current",
    "task.impact_current_threshold": "impact_current_threshold",
    "task.swing_damping": "swing_damping",
    "task.restitution": "restitution",
    "task.hold_settle": "hold_settle",
    "task.allow_regen": "allow_regen",
}
_PTP_FIELDS = ("kp", "v_max", "a_max", "drop_clearance")

# top winch friction ~1.2x the payload's weight torque (14 kg * 9.81 * 0.042 = 5.77 N m):
# enough that gravity cannot back-drive it
_TOP_MOTOR = {
    "rated_power": 750.0, "gear_ratio": 1 / 70, "drum_radius": 0.042,
    "resistance": 2.0, "kt": 0.5, "ke": 0.5, "static_friction": 7.0,
    "viscous_friction": 0.5, "max_speed": 628.0, "max_current": 15.0,
    "inertia": 2e-4, "vel_kp": 0.0, "vel_ki": 0.0,
}
_SIDE_MOTOR = {
    "rated_power": 188.0, "gear_ratio": 1 / 15, "drum_radius": 0.008,
    "resistance": 0.2, "kt": 0.05, "ke": 0.05, "static_friction": 0.05,
    "viscous_friction": 0.001, "max_speed": 600.0, "max_current": 20.0,
    "inertia": 3e-5, "vel_kp": 0.0, "vel_ki": 0.0,
}
_BRAKES = {
    "top": {"hold_torque": 40.0, "power": 11.0, "switch_delay": 0.05},
    "left": {"hold_torque": 5.0, "power": 8.0, "switch_delay": 0.05},
    "right": {"hold_torque": 5.0, "power": 8.0, "switch_delay": 0.05},
}


def _default_flat() -> Dict[str, Union[float, int, bool]]:
    d: Dict[str, Union[float, int, bool]] = {
        "geometry.anchor_top.x": 0.5, "geometry.anchor_top.y": 1.3,
        "geometry.anchor_left.x": 0.0, "geometry.anchor_left.y": 0.8,
        "geometry.anchor_right.x": 1.0, "geometry.anchor_right.y": 0.3,
        "geometry.ground_y": 0.0,
        "geometry.neighbor.x": 0.4, "geometry.neighbor.width": 0.2,
        "geometry.neighbor.height": 0.2,
        "geometry.target_x": 0.7,
    }
    for name in MOTORS:
        src = _TOP_MOTOR if name == "top" else _SIDE_MOTOR
        for k, v in src.items():
            d[f"motor.{name}.{k}"] = v
        for k, v in _BRAKES[name].items():
            d[f"brake.{name}.{k}"] = v
    d.update({
        "payload.mass": 14.0, "payload.halfwidth": 0.1, "payload.start_x": 0.2,
        "sim.dt": 0.001, "sim.seed": 0,
        "task.h_d": 0.45, "task.l2_threshold": 1.19,
        "task.lift_speed": 0.1, "task.fine_speed": 0.05,
        "task.drop_v_lo": 0.03, "task.drop_v_hi": 0.15,
        # 1.05 x side static friction reflected to the motor: 1.05*0.05/15/0.05
        "task.keeper_current": 0.07,
        "task.impact_current_threshold": 0.5,
        "task.swing_damping": 0.05, "task.restitution": 0.0,
        "task.hold_settle": 0.5, "task.allow_regen": False,
        "sensor.rate": 150.0, "sensor.noise_sigma": 0.001,
        "ptp.kp": 2.0, "ptp.v_max": 0.2, "ptp.a_max": 0.5, "ptp.drop_clearance": 0.03,
    })
    return d


DEFAULTS = _default_flat()
_INT_KEYS = {"sim.seed"}
_BOOL_KEYS = {"task.allow_regen"}


def from_flat(values: Mapping[str, Union[float, int, bool]]) -> ScenarioConfig:
    v = dict(DEFAULTS)
    for key, value in values.items():
        if key not in DEFAULTS:
            raise ScenarioError(key, "unknown key")
        v[key] = value

    def vec(prefix: str) -> Vec2:
        return Vec2(float(v[prefix + ".x"]), float(v[prefix + ".y"]))

    ground = float(v["geometry.ground_y"])
    geometry = RobotGeometry(
        anchor_top=vec("geometry.anchor_top"),
        anchor_left=vec("geometry.anchor_left"),
        anchor_right=vec("geometry.anchor_right"),
        ground_y=ground,
        neighbor=Rect(float(v["geometry.neighbor.x"]), ground,
                      float(v["geometry.neighbor.width"]), float(v["geometry.neighbor.height"])),
        target_x=float(v["geometry.target_x"]),
        workspace=Rect(0.0, ground, 1.0, 1.0),
    )
    motors = {
        name: MotorParams(**{attr: float(v[f"motor.{name}.{k}"]) for k, attr in _MOTOR_FIELDS.items()})
        for name in MOTORS
    }
    brakes = {
        name: BrakeParams(**{k: float(v[f"brake.{name}.{k}"]) for k in _BRAKE_FIELDS})
        for name in MOTORS
    }
    task = TaskParams(**{
        attr: (bool(v[key]) if key in _BOOL_KEYS else float(v[key]))
        for key, attr in _TASK_FIELDS.items()
    })
    cfg = ScenarioConfig(
        geometry=geometry,
        motors=motors,
        brakes=brakes,
        payload_mass=float(v["payload.mass"]),
        payload_halfwidth=float(v["payload.halfwidth"]),
        start_x=float(v["payload.start_x"]),
        dt=float(v["sim.dt"]),
        rng_seed=int(v["sim.seed"]),
        task=task,
        sensor_rate=float(v["sensor.rate"]),
        sensor_noise_sigma=float(v["sensor.noise_sigma"]),
        ptp=PtpParams(**{k: float(v[f"ptp.{k}"]) for k in _PTP_FIELDS}),
    )
    validate(cfg)
    return cfg


def to_flat(cfg: ScenarioConfig) -> Dict[str, Union[float, int, bool]]:
    g = cfg.geometry
    d: Dict[str, Union[float, int, bool]] = {
        "geometry.anchor_top.x": g.anchor_top.x, "geometry.anchor_top.y": g.anchor_top.y,
        "geometry.anchor_left.x": g.anchor_left.x, "geometry.anchor_left.y": g.anchor_left.y,
        "geometry.anchor_right.x": g.anchor_right.x, "geometry.anchor_right.y": g.anchor_right.y,
        "geometry.ground_y": g.ground_y,
        "geometry.neighbor.x": g.neighbor.x, "geometry.neighbor.width": g.neighbor.width,
        "geometry.neighbor.height": g.neighbor.height,
        "geometry.target_x": g.target_x,
    }
    for name in MOTORS:
        for k, attr in _MOTOR_FIELDS.items():
            d[f"motor.{name}.{k}"] = getattr(cfg.motors[name], attr)
        for k in _BRAKE_FIELDS:
            d[f"brake.{name}.{k}"] = getattr(cfg.brakes[name], k)
    d.update({
        "payload.mass": cfg.payload_mass, "payload.halfwidth": cfg.payload_halfwidth,
        "payload.start_x": cfg.start_x, "sim.dt": cfg.dt, "sim.seed": cfg.rng_seed,
        "sensor.rate": cfg.sensor_rate, "sensor.noise_sigma": cfg.sensor_noise_sigma,
    })
    for key, attr in _TASK_FIELDS.items():
        d[key] = getattr(cfg.task, attr)
    for k in _PTP_FIELDS:
        d[f"ptp.{k}"] = getattr(cfg.ptp, k)
    return d


def _check(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ScenarioError(key, message)


def validate(cfg: ScenarioConfig) -> None:
    """Raise ScenarioError naming the first offending key."""
    for key, value in to_flat(cfg).items():
        if isinstance(value, float):
            _check(math.isfinite(value), key, "must be finite")
    g = cfg.geometry
    _check(g.anchor_top.y > g.anchor_left.y, "geometry.anchor_top.y", "must be above the left anchor")
    _check(g.anchor_top.y > g.anchor_right.y, "geometry.anchor_top.y", "must be above the right anchor")
    _check(g.anchor_left.x < g.anchor_top.x, "geometry.anchor_left.x", "must be left of the top anchor")
    _check(g.anchor_top.x < g.anchor_right.x, "geometry.anchor_right.x", "must be right of the top anchor")
    _check(g.neighbor.width > 0, "geometry.neighbor.width", "must be positive")
    _check(g.neighbor.height > 0, "geometry.neighbor.height", "must be positive")
    for name in MOTORS:
        m = cfg.motors[name]
        for k, attr in _MOTOR_FIELDS.items():
            if k in ("vel_kp", "vel_ki"):
                _check(getattr(m, attr) >= 0, f"motor.{name}.{k}", "must be >= 0")
            else:
                _check(getattr(m, attr) > 0, f"motor.{name}.{k}", "must be strictly positive")
        _check(m.gear_ratio <= 1, f"motor.{name}.gear_ratio", "drum revs per motor rev must be <= 1")
        _check(math.isclose(m.kt, m.ke, rel_tol=1e-9), f"motor.{name}.ke", "must equal kt in SI units")
        b = cfg.brakes[name]
        _check(b.power >= 0, f"brake.{name}.power", "must be >= 0")
        _check(b.switch_delay >= 0, f"brake.{name}.switch_delay", "must be >= 0")
        # a braked cable must never slip: worst case is the full payload weight
        _check(b.hold_torque > cfg.payload_mass * GRAVITY * 2.0 * m.drum_radius,
               f"brake.{name}.hold_torque", "must exceed twice the payload weight torque at the drum")
    _check(cfg.payload_mass > 0, "payload.mass", "must be strictly positive")
    _check(cfg.payload_halfwidth > 0, "payload.halfwidth", "must be strictly positive")
    _check(cfg.dt > 0, "sim.dt", "must be strictly positive")
    _check(cfg.rng_seed >= 0, "sim.seed", "must be non-negative")
    t = cfg.task
    _check(0 <= t.drop_v_lo < t.drop_v_hi, "task.drop_v_lo", "need 0 <= drop_v_lo < drop_v_hi")
    _check(t.h_d > g.ground_y + g.neighbor.height + cfg.payload_halfwidth, "task.h_d",
           "must clear the neighbor box with the payload")
    for key in ("l2_threshold", "lift_speed", "fine_speed", "keeper_current", "impact_current_threshold"):
        _check(getattr(t, key) > 0, f"task.{key}", "must be strictly positive")
    _check(t.swing_damping >= 0, "task.swing_damping", "must be >= 0")
    _check(0 <= t.restitution < 1, "task.restitution", "must lie in [0, 1)")
    _check(t.hold_settle >= 0, "task.hold_settle", "must be >= 0")
    _check(cfg.sensor_rate > 0, "sensor.rate", "must be strictly positive")
    _check(cfg.sensor_noise_sigma >= 0, "sensor.noise_sigma", "must be >= 0")
    for k in _PTP_FIELDS:
        _check(getattr(cfg.ptp, k) > 0, f"ptp.{k}", "must be strictly positive")
    ws = g.workspace
    _check(ws.x < cfg.start_x < ws.right, "payload.start_x", "must lie inside the workspace")


# -- file format ----------------------------------------------------------------

def _parse_value(key: str, text: str) -> Union[float, int, bool]:
    text = text.strip()
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ScenarioError(key, f"expected a boolean, got {text!r}")
    try:
        if key in _INT_KEYS:
            return int(text)
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(key, f"cannot parse {text!r}") from None


def parse_scenario(text: str) -> ScenarioConfig:
    values: Dict[str, Union[float, int, bool]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ScenarioError(key, "unknown key")
        if key in values:
            raise ScenarioError(key, "duplicate key")
        values[key] = _parse_value(key, value)
    return from_flat(values)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def dump_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    section = None
    for key, value in to_flat(cfg).items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                lines.append("")
            section = head
        if isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def default_scenario() -> ScenarioConfig:
    return from_flat({})


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, rng_seed=int(seed))
