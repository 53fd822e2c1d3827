"""Experiment harness: the tick loop, run logs and the energy comparison.

One tick, in order: sample sensors, evaluate monitors, advance the phase,
compute the actuator command, step brakes and motors, step the plant, let
unpowered shafts follow their cables, then integrate the energy ledger.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .actuation import (BrakeState, EnergyLedger, MotorState, brake_step,
                        follow_cable, integrate, motor_step)
from .baseline import PtpPlan, build_ptp_plan, ptp_tracking_cmd
from .config import MOTORS, ScenarioConfig, Vec2, to_flat
from .controllers import (ActuatorCommand, BrakeLatch, cartesian_velocity_cmd, drop_cmd,
                          fine_positioning_cmd, hold_cmd, other_side, swing_cmd)
from .kinematics import KinematicsError, active_side
from .plant import (DRIVEN, ConstraintFailure, PlantState, SensorFrame, SensorModel, cable_kinds,
                    initial_state, step)
from .supervisor import (PHASE_COLUMN, FsmFault, MonitorBank, MonitorEvent, Phase, step_fsm)

log = logging.getLogger(__name__)

PROPOSED_COLUMNS = ("1-2", "2-3", "3-4", "4-5", "5-6", "6-7")
PTP_COLUMNS = ("1-2", "2-3", "3-5", "5-6", "6-7")
DEFAULT_TIMEOUT = 60.0
# a drop landing this far past the neighbor's far face keeps the fine lift short
DROP_OFFSET = 0.04


def _csv_columns() -> List[str]:
    cols = ["t", "phase", "x", "y", "vx", "vy", "mode"]
    for m in MOTORS:
        cols += [f"{m}_mode", f"{m}_speed", f"{m}_current", f"{m}_voltage", f"{m}_power"]
    for m in MOTORS:
        cols += [f"brake_{m}_energized", f"brake_{m}_engaged"]
    for m in MOTORS:
        cols += [f"cable_{m}_length", f"cable_{m}_taut", f"cable_{m}_tension"]
    cols += [f"E_{m}" for m in MOTORS] + [f"E_brake_{m}" for m in MOTORS] + ["E_total"]
    return cols


CSV_COLUMNS: Tuple[str, ...] = tuple(_csv_columns())


@dataclass
class RunLog:
    header: Dict[str, object]
    rows: List[tuple] = field(default_factory=list)
    events: List[MonitorEvent] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)
    failed: bool = False
    reason: str = ""

    @property
    def controller(self) -> str:
        return str(self.header["controller"])

    @property
    def duration(self) -> float:
        return float(self.summary["duration"])

    @property
    def total(self) -> float:
        return float(self.summary["total"])

    def event_ids(self) -> List[int]:
        return [e.id for e in self.events]

    def column(self, name: str) -> np.ndarray:
        i = CSV_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(_format_row(r))
        return buf.getvalue()

    def sidecar(self) -> Dict[str, object]:
        return {
            "header": self.header,
            "columns": list(CSV_COLUMNS),
            "events": [{"id": e.id, "t": e.t, "value": e.value, "detail": e.detail} for e in self.events],
            "summary": self.summary,
            "failed": self.failed,
            "reason": self.reason,
        }

    def write(self, out_dir: Union[str, Path], stem: Optional[str] = None) -> Tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.controller
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _format_row(r: tuple) -> List[str]:
    out = []
    for name, v in zip(CSV_COLUMNS, r):
        if isinstance(v, str):
            out.append(v)
        elif isinstance(v, bool):
            out.append("1" if v else "0")
        elif name == "t":
            out.append(f"{v:.6f}")
        elif name.startswith("E_"):
            out.append(f"{v:.4f}")
        else:
            out.append(f"{v:.9g}")
    return out


def _parse_cell(name: str, text: str) -> object:
    if name in ("phase", "mode") or name.endswith("_mode"):
        return text
    if "_energized" in name or "_engaged" in name or "_taut" in name:
        return text == "1"
    return float(text)


def load_runlog(path: Union[str, Path]) -> RunLog:
    """Read a log from its JSON sidecar (and the CSV next to it, if present)."""
    path = Path(path)
    json_path = path.with_suffix(".json")
    data = json.loads(json_path.read_text())
    events = [MonitorEvent(e["id"], e["t"], e.get("value", 0.0), e.get("detail", ""))
              for e in data.get("events", [])]
    rows: List[tuple] = []
    csv_path = path.with_suffix(".csv")
    if csv_path.exists():
        with csv_path.open(newline="") as fh:
            reader = csv.reader(fh)
            cols = next(reader)
            for rec in reader:
                rows.append(tuple(_parse_cell(c, v) for c, v in zip(cols, rec)))
    return RunLog(data["header"], rows, events, data["summary"], data.get("failed", False),
                  data.get("reason", ""))


class RunFault(RuntimeError):
    pass


class ProposedController:
    """Phase sequencing plus the per-phase continuous controllers."""

    kind = "proposed"

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.monitors = MonitorBank(cfg)
        self.phase = Phase.INIT
        self.phase_t0 = 0.0
        self.start_side: Optional[str] = None
        self.drop_latch = BrakeLatch()
        self.fine_latch = BrakeLatch()

    @property
    def arriving(self) -> str:
        return other_side(self.start_side or "left")

    def column(self, t: float) -> Optional[str]:
        return PHASE_COLUMN.get(self.phase)

    def finished(self, t: float) -> bool:
        return self.phase is Phase.DONE

    def update(self, frame: SensorFrame, motors: Dict[str, MotorState],
               brakes: Dict[str, BrakeState]) -> List[MonitorEvent]:
        t = frame.timestamp
        if self.start_side is None:
            self.start_side = active_side(frame.position, self.cfg.geometry)
        side = active_side(frame.position, self.cfg.geometry)
        events = self.monitors.evaluate(frame, self.phase, motors["top"].current,
                                        brakes[side].engaged)
        settled = self.phase is Phase.HOLD and t - self.phase_t0 >= self.cfg.task.hold_settle - 1e-9
        new = step_fsm(self.phase, events, settled)
        if new is not self.phase:
            log.debug("t=%.3f %s -> %s", t, self.phase.value, new.value)
            self.phase = new
            self.phase_t0 = t
        return events

    def command(self, frame: SensorFrame, t: float) -> ActuatorCommand:
        cfg = self.cfg
        ph = self.phase
        vel = self.monitors.track.velocity()
        if ph is Phase.INIT:
            return cartesian_velocity_cmd(Vec2(0.0, 0.0), frame, cfg)
        if ph is Phase.DONE:
            return hold_cmd(cfg, self.arriving)
        if ph is Phase.LIFTING:
            return cartesian_velocity_cmd(Vec2(0.0, cfg.task.lift_speed), frame, cfg)
        if ph is Phase.SWING:
            return swing_cmd(frame, cfg, self.arriving)
        if ph is Phase.HOLD:
            return hold_cmd(cfg, self.arriving)
        if ph is Phase.DROP:
            return drop_cmd(frame, cfg, self.drop_latch, vel)
        sub = {Phase.FINE_LIFT: "FineLift", Phase.FINE_SWING: "FineSwing",
               Phase.FINE_DROP: "FineDrop"}[ph]
        return fine_positioning_cmd(sub, frame, cfg, self.fine_latch, vel)


class PtpController:
    """Time-indexed tracking of a precomputed trapezoidal plan."""

    kind = "ptp"

    def __init__(self, cfg: ScenarioConfig, plan: PtpPlan):
        self.cfg = cfg
        self.plan = plan
        self._emitted = 0
        self.t = 0.0

    @property
    def phase(self) -> str:
        return self.plan.columns[self.plan.segment_index(self.t)]

    def column(self, t: float) -> str:
        return self.plan.columns[self.plan.segment_index(t)]

    def finished(self, t: float) -> bool:
        return t >= self.plan.total_time - 1e-9

    def update(self, frame: SensorFrame, motors: Dict[str, MotorState],
               brakes: Dict[str, BrakeState]) -> List[MonitorEvent]:
        self.t = frame.timestamp
        events = []
        marks = self.plan.event_times()
        while self._emitted < len(marks) and marks[self._emitted][1] <= self.t + 1e-9:
            events.append(MonitorEvent(marks[self._emitted][0], self.t, 0.0, "waypoint"))
            self._emitted += 1
        return events

    def command(self, frame: SensorFrame, t: float) -> ActuatorCommand:
        return ptp_tracking_cmd(self.plan, t, frame, self.cfg)


def proposed_drop_x(cfg: ScenarioConfig) -> float:
    """Horizontal landing point of the swing-and-drop, used as a PTP waypoint."""
    box = cfg.geometry.neighbor
    return box.right + cfg.payload_halfwidth + DROP_OFFSET


def run(cfg: ScenarioConfig, controller: str = "proposed", reference_duration: Optional[float] = None,
        timeout: float = DEFAULT_TIMEOUT, record: bool = True, drop_x: Optional[float] = None) -> RunLog:
    """Simulate one experiment and return its log.

    Faults (FSM, constraint solver, timeout) return a partial log with
    ``failed`` set instead of raising.
    """
    if controller == "proposed":
        ctrl: Union[ProposedController, PtpController] = ProposedController(cfg)
    elif controller == "ptp":
        if reference_duration is None:
            raise ValueError("a ptp run needs the reference duration of a proposed run")
        plan = build_ptp_plan(cfg, reference_duration, proposed_drop_x(cfg) if drop_x is None else drop_x)
        ctrl = PtpController(cfg, plan)
    else:
        raise ValueError(f"unknown controller {controller!r}")

    header: Dict[str, object] = {
        "controller": controller,
        "config_hash": cfg.digest(),
        "seed": cfg.rng_seed,
        "version": __version__,
        "dt": cfg.dt,
        "reference_duration": reference_duration,
        "scenario": to_flat(cfg),
    }
    if controller == "ptp":
        header["plan"] = _plan_header(ctrl.plan)  # type: ignore[union-attr]
    runlog = RunLog(header)

    dt = cfg.dt
    state = initial_state(cfg)
    motors = {m: MotorState() for m in MOTORS}
    brakes = {m: BrakeState() for m in MOTORS}
    sensors = SensorModel(cfg)
    ledger = EnergyLedger(allow_regen=cfg.task.allow_regen,
                          brake_power={m: cfg.brakes[m].power for m in MOTORS})
    ledger.seed([0.0, 0.0, 0.0])
    brake_on_ticks = {m: 0 for m in MOTORS}
    max_ticks = int(math.ceil(timeout / dt))
    columns_seen: List[str] = []
    event_positions: Dict[str, List[float]] = {}
    k = 0
    end_time = 0.0
    try:
        while True:
            frame = sensors.sample(state, motors, brakes)
            t = frame.timestamp
            events = ctrl.update(frame, motors, brakes)
            runlog.events.extend(events)
            for e in events:
                event_positions[str(e.id)] = [frame.position.x, frame.position.y]
            if ctrl.finished(t):
                end_time = t
                break
            if k >= max_ticks:
                raise RunFault(f"timeout after {timeout:.1f} s in phase {_phase_name(ctrl)}")
            cmd = ctrl.command(frame, t)
            col = ctrl.column(t) or "0-1"
            if not columns_seen or columns_seen[-1] != col:
                columns_seen.append(col)
            state, powers = _advance(state, motors, brakes, cmd, cfg)
            energized = [brakes[m].energized for m in MOTORS]
            for m in MOTORS:
                brake_on_ticks[m] += energized[MOTORS.index(m)]
            integrate(ledger, powers, dt, col, energized)
            k += 1
            if record:
                runlog.rows.append(_row(state, motors, brakes, ledger, _phase_name(ctrl)))
    except (FsmFault, ConstraintFailure, KinematicsError, RunFault) as exc:
        runlog.failed = True
        runlog.reason = f"{type(exc).__name__}: {exc}"
        end_time = state.time
        log.warning("run failed: %s", runlog.reason)

    runlog.summary = _summary(ledger, cfg, end_time, state, runlog.events,
                              PROPOSED_COLUMNS if controller == "proposed" else PTP_COLUMNS, brake_on_ticks)
    runlog.summary["event_positions"] = event_positions
    return runlog


def landing_x(proposed: RunLog) -> Optional[float]:
    """Measured x at the drop impact of a proposed run, if it got that far."""
    pos = proposed.summary.get("event_positions", {}).get("4")
    return None if pos is None else float(pos[0])


def run_pair(cfg: ScenarioConfig, timeout: float = DEFAULT_TIMEOUT,
             record: bool = True) -> Tuple[RunLog, RunLog]:
    """Proposed run, then the PTP run matched to its duration and landing point."""
    proposed = run(cfg, "proposed", timeout=timeout, record=record)
    if proposed.failed:
        raise RunFault(f"proposed run failed: {proposed.reason}")
    ptp = run(cfg, "ptp", reference_duration=proposed.duration, timeout=timeout, record=record,
              drop_x=landing_x(proposed))
    return proposed, ptp


def _phase_name(ctrl: Union[ProposedController, PtpController]) -> str:
    ph = ctrl.phase
    return ph.value if isinstance(ph, Phase) else str(ph)


def _advance(state: PlantState, motors: Dict[str, MotorState], brakes: Dict[str, BrakeState],
             cmd: ActuatorCommand, cfg: ScenarioConfig) -> Tuple[PlantState, List[float]]:
    dt = cfg.dt
    for m in MOTORS:
        brakes[m], _ = brake_step(brakes[m], cmd.brakes[m], cfg.brakes[m], dt)
    for m in MOTORS:
        mode, setpoint = cmd.motors[m]
        ms = motors[m]
        if mode is not ms.mode:
            ms.mode = mode
            ms.integral = 0.0
            ms.ramped = ms.speed
        ms.setpoint = setpoint
        load = state.tension[m] * cfg.motors[m].drum_radius
        motors[m] = motor_step(ms, cfg.motors[m], load, dt, brakes[m].engaged)
    kinds = cable_kinds(motors, brakes, cfg)
    new = step(state, motors, brakes, cfg, kinds)
    for m in MOTORS:
        if kinds[m] != DRIVEN:
            rate = (new.spooled[m] - state.spooled[m]) / dt
            follow_cable(motors[m], cfg.motors[m], rate, dt)
    return new, [motors[m].power for m in MOTORS]


def _row(state: PlantState, motors: Dict[str, MotorState], brakes: Dict[str, BrakeState],
         ledger: EnergyLedger, phase: str) -> tuple:
    r: list = [state.time, phase, state.px, state.py, state.vx, state.vy, state.mode.value]
    for m in MOTORS:
        ms = motors[m]
        r += [ms.mode.value, ms.speed, ms.current, ms.voltage, ms.power]
    for m in MOTORS:
        r += [brakes[m].energized, brakes[m].engaged]
    for m in MOTORS:
        r += [state.spooled[m], state.taut[m], state.tension[m]]
    r += [ledger.motor_energy[m] for m in MOTORS]
    r += [ledger.brake_energy(m) for m in MOTORS]
    r.append(ledger.total())
    return tuple(r)


def _summary(ledger: EnergyLedger, cfg: ScenarioConfig, duration: float, state: PlantState,
             events: Sequence[MonitorEvent], columns: Sequence[str],
             brake_on_ticks: Dict[str, int]) -> Dict[str, object]:
    dt = cfg.dt
    phase_energy = {c: {m: ledger.phase_motor.get(c, {}).get(m, 0.0) for m in MOTORS} for c in columns}
    phase_brake = {c: {m: cfg.brakes[m].power * ledger.phase_brake_ticks.get(c, {}).get(m, 0) * dt
                       for m in MOTORS} for c in columns}
    motor_energy = dict(ledger.motor_energy)
    brake_energy = {m: ledger.brake_energy(m) for m in MOTORS}
    motor_total = sum(motor_energy.values())
    brake_total = sum(brake_energy.values())
    return {
        "columns": list(columns),
        "phase_energy": phase_energy,
        "phase_brake_energy": phase_brake,
        "motor_energy": motor_energy,
        "brake_energy": brake_energy,
        "brake_on_time": {m: brake_on_ticks[m] * dt for m in MOTORS},
        "brake_on_ticks": dict(brake_on_ticks),
        "brake_power": {m: cfg.brakes[m].power for m in MOTORS},
        "motor_total": motor_total,
        "brake_total": brake_total,
        "total": motor_total + brake_total,
        "duration": duration,
        "final_position": [state.px, state.py],
        "event_times": {str(e.id): e.t for e in events},
    }


def _plan_header(plan: PtpPlan) -> Dict[str, object]:
    return {
        "waypoints": [[w.x, w.y] for w in plan.waypoints],
        "labels": list(plan.labels),
        "segments": [{"distance": s.profile.distance, "v_peak": s.profile.v_peak,
                      "t_accel": s.profile.t_accel, "t_cruise": s.profile.t_cruise, "t0": s.t0}
                     for s in plan.segments],
        "total_time": plan.total_time,
    }


# --- comparison -------------------------------------------------------------

class ScenarioMismatch(ValueError):
    pass


@dataclass
class ComparisonReport:
    """Energy tables for a baseline log against a proposed log."""

    motor_table: Dict[str, Dict[str, Dict[str, float]]]  # kind -> motor -> column -> J
    cumulative: Dict[str, Dict[str, float]]  # kind -> column -> J
    brake_table: Dict[str, Dict[str, float]]  # kind -> brake -> J
    motor_totals: Dict[str, float]
    brake_totals: Dict[str, float]
    grand_totals: Dict[str, float]
    savings: float
    column_savings: Dict[str, float]
    columns: Dict[str, List[str]]

    @property
    def largest_saving_column(self) -> str:
        return max(self.column_savings, key=lambda c: self.column_savings[c])

    def to_dict(self) -> Dict[str, object]:
        return {
            "motor_table": self.motor_table,
            "cumulative": self.cumulative,
            "brake_table": self.brake_table,
            "motor_totals": self.motor_totals,
            "brake_totals": self.brake_totals,
            "grand_totals": self.grand_totals,
            "savings": self.savings,
            "column_savings": self.column_savings,
            "columns": self.columns,
        }

    def text(self) -> str:
        cols = list(PROPOSED_COLUMNS)
        lines = ["Motor energy per subtask [J]",
                 f"{'':8s}{'':10s}" + "".join(f"{c:>10s}" for c in cols)]
        for m in MOTORS:
            for kind in ("ptp", "proposed"):
                lines.append(f"{m.capitalize():8s}{kind:10s}" + self._cells(kind, self.motor_table[kind][m]))
        for kind in ("ptp", "proposed"):
            lines.append(f"{'Total':8s}{kind:10s}" + self._cells(kind, self.cumulative[kind]))
        lines += ["", "Brake energy [J]",
                  f"{'':10s}" + "".join(f"{m.capitalize():>10s}" for m in MOTORS) + f"{'Total':>10s}"]
        for kind in ("ptp", "proposed"):
            row = self.brake_table[kind]
            lines.append(f"{kind:10s}" + "".join(f"{row[m]:10.2f}" for m in MOTORS)
                         + f"{self.brake_totals[kind]:10.2f}")
        lines += ["",
                  f"grand total ptp {self.grand_totals['ptp']:.2f} J, "
                  f"proposed {self.grand_totals['proposed']:.2f} J",
                  f"savings {100.0 * self.savings:.1f}%"]
        return "\n".join(lines) + "\n"

    def _cells(self, kind: str, values: Dict[str, float]) -> str:
        out = []
        for c in PROPOSED_COLUMNS:
            if c in values:
                out.append(f"{values[c]:10.2f}")
            elif c == "3-4" and "3-5" in values:
                out.append(f"{values['3-5']:10.2f}")
            elif c == "4-5" and "3-5" in values:
                out.append(f"{'(3-5)':>10s}")
            else:
                out.append(f"{'-':>10s}")
        return "".join(out)


def _motor_columns(runlog: RunLog) -> Dict[str, Dict[str, float]]:
    pe = runlog.summary["phase_energy"]
    cols = runlog.summary["columns"]
    return {m: {c: float(pe[c][m]) for c in cols} for m in MOTORS}


def _cumulative(table: Dict[str, Dict[str, float]], cols: Sequence[str]) -> Dict[str, float]:
    acc = 0.0
    out = {}
    for c in cols:
        acc += sum(table[m][c] for m in MOTORS)
        out[c] = acc
    return out


def compare(log_a: RunLog, log_b: RunLog, check_scenario: bool = True) -> ComparisonReport:
    """Baseline ``log_a`` against proposed ``log_b``; savings on grand totals."""
    if check_scenario and log_a.header.get("config_hash") != log_b.header.get("config_hash"):
        raise ScenarioMismatch(f"scenario hash {log_a.header.get('config_hash')} != "
                               f"{log_b.header.get('config_hash')}")
    logs = {"ptp": log_a, "proposed": log_b}
    cols = {k: list(v.summary["columns"]) for k, v in logs.items()}
    motor = {k: _motor_columns(v) for k, v in logs.items()}
    # published logs carry their own cumulative row, which need not match the cells
    cumulative = {k: dict(v.summary["cumulative"]) if "cumulative" in v.summary
                  else _cumulative(motor[k], cols[k]) for k, v in logs.items()}
    brakes = {k: {m: float(v.summary["brake_energy"][m]) for m in MOTORS} for k, v in logs.items()}
    motor_totals = {k: float(v.summary["motor_total"]) for k, v in logs.items()}
    brake_totals = {k: float(v.summary["brake_total"]) for k, v in logs.items()}
    grand = {k: motor_totals[k] + brake_totals[k] for k in logs}
    savings = 1.0 - grand["proposed"] / grand["ptp"] if grand["ptp"] else 0.0

    def col_sum(kind: str, names: Sequence[str]) -> float:
        return sum(motor[kind][m].get(c, 0.0) for m in MOTORS for c in names)

    groups = _aligned_groups(cols["ptp"], cols["proposed"])
    column_savings = {label: col_sum("ptp", a) - col_sum("proposed", b) for label, a, b in groups}
    return ComparisonReport(motor, cumulative, brakes, motor_totals, brake_totals, grand, savings,
                            column_savings, cols)


def _aligned_groups(a: Sequence[str], b: Sequence[str]) -> List[Tuple[str, List[str], List[str]]]:
    """Pair columns of two reports, merging spans such as 3-5 with 3-4 + 4-5."""
    def span(c: str) -> Tuple[int, int]:
        lo, hi = c.split("-")
        return int(lo), int(hi)

    out = []
    ia = ib = 0
    while ia < len(a) and ib < len(b):
        ga, gb = [a[ia]], [b[ib]]
        ia += 1
        ib += 1
        while span(ga[-1])[1] != span(gb[-1])[1]:
            if span(ga[-1])[1] < span(gb[-1])[1] and ia < len(a):
                ga.append(a[ia])
                ia += 1
            elif ib < len(b):
                gb.append(b[ib])
                ib += 1
            else:
                break
        label = f"{span(ga[0])[0]}-{span(ga[-1])[1]}"
        out.append((label, ga, gb))
    return out


def fixture_path(kind: str) -> Path:
    return Path(__file__).with_name("data") / f"published_{kind}.json"


def load_fixture(kind: str) -> RunLog:
    """Log pair holding the published per-subtask and brake energies."""
    return load_runlog(fixture_path(kind))
