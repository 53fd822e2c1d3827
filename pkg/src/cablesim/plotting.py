"""SVG figures for run logs: cumulative energy, trajectory and brake timeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .config import MOTORS  # noqa: E402
from .harness import RunLog  # noqa: E402
from .supervisor import EVENT_GLYPHS  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cablesim"
_SVG_META = {"Date": None}
_COLORS = {"top": "tab:blue", "left": "tab:orange", "right": "tab:green", "system": "black"}


@dataclass
class PlotResult:
    paths: Dict[str, Path]
    markers: Dict[str, int] = field(default_factory=dict)  # controller -> trajectory markers
    omitted_brakes: Dict[str, List[str]] = field(default_factory=dict)


def _label(runlog: RunLog) -> str:
    return "PTP" if runlog.controller == "ptp" else "Proposed"


def energy_curves(runlog: RunLog) -> Dict[str, np.ndarray]:
    t = runlog.column("t")
    out = {"t": t}
    for m in MOTORS:
        out[m] = runlog.column(f"E_{m}")
    out["system"] = runlog.column("E_total")
    return out


def energized_intervals(runlog: RunLog, brake: str) -> Tuple[List[Tuple[float, float]], int]:
    """Spans during which a brake was energized, and the number of switchings."""
    t = runlog.column("t")
    on = runlog.column(f"brake_{brake}_energized").astype(bool)
    if len(t) == 0:
        return [], 0
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    spans = []
    start = None
    for ti, e in zip(t, on):
        if e and start is None:
            start = ti - dt
        elif not e and start is not None:
            spans.append((float(start), float(ti - dt)))
            start = None
    if start is not None:
        spans.append((float(start), float(t[-1])))
    transitions = int(np.count_nonzero(on[1:] != on[:-1]))
    return spans, transitions


def plot_energy(logs: Sequence[RunLog], path: Path) -> None:
    fig, axes = plt.subplots(1, len(logs), figsize=(5.5 * len(logs), 4), squeeze=False)
    for ax, lg in zip(axes[0], logs):
        c = energy_curves(lg)
        for key in (*MOTORS, "system"):
            ax.plot(c["t"], c[key], color=_COLORS[key], label=key if key != "system" else "system (incl. brakes)")
        ax.set_title(f"{_label(lg)} controller")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("cumulative energy [J]")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_trajectory(logs: Sequence[RunLog], path: Path) -> Dict[str, int]:
    fig, ax = plt.subplots(figsize=(6, 5))
    markers = {}
    first = logs[0]
    scen = first.header.get("scenario", {})
    if scen:
        ax.add_patch(Rectangle((scen["geometry.neighbor.x"], scen["geometry.ground_y"]),
                               scen["geometry.neighbor.width"], scen["geometry.neighbor.height"],
                               color="0.8", label="placed payload"))
        ax.axhline(scen["geometry.ground_y"], color="0.4", lw=1)
    styles = {"proposed": "-", "ptp": "--"}
    for lg in logs:
        line, = ax.plot(lg.column("x"), lg.column("y"), styles.get(lg.controller, "-"), label=_label(lg))
        count = 0
        for key, (x, y) in sorted(lg.summary.get("event_positions", {}).items()):
            ax.plot(x, y, "o", mfc="white", mec=line.get_color(), ms=12, gid=f"marker-{lg.controller}-{key}")
            ax.annotate(EVENT_GLYPHS[int(key)], (x, y), ha="center", va="center", fontsize=8)
            count += 1
        markers[lg.controller] = count
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return markers


def plot_brakes(logs: Sequence[RunLog], path: Path) -> Dict[str, List[str]]:
    fig, axes = plt.subplots(len(logs), 1, figsize=(7, 1.2 + 1.3 * len(logs)), squeeze=False)
    omitted: Dict[str, List[str]] = {}
    for ax, lg in zip(axes[:, 0], logs):
        shown = []
        omitted[lg.controller] = []
        for b in MOTORS:
            spans, transitions = energized_intervals(lg, b)
            if transitions == 0:
                omitted[lg.controller].append(b)
                continue
            row = len(shown)
            ax.broken_barh([(s, e - s) for s, e in spans], (row - 0.35, 0.7), color=_COLORS[b])
            shown.append(b)
        ax.set_yticks(range(len(shown)))
        ax.set_yticklabels(shown)
        ax.set_ylim(-0.7, max(len(shown), 1) - 0.3)
        ax.set_xlabel("time [s]")
        title = f"{_label(lg)}: brake energized (released)"
        ax.set_title(title, fontsize=10)
        if omitted[lg.controller]:
            parts = []
            for b in omitted[lg.controller]:
                on = lg.column(f"brake_{b}_energized")
                parts.append(f"{b} ({'always energized' if len(on) and on[0] else 'always engaged'})")
            note = "omitted, never switched: " + ", ".join(parts)
            if shown:
                ax.text(0.99, -0.45, note, transform=ax.transAxes, ha="right", fontsize=8, style="italic")
            else:
                ax.set_yticks([])
                ax.text(0.5, 0.5, note, transform=ax.transAxes, ha="center", va="center", fontsize=9,
                        style="italic")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return omitted


def render_plots(logs: Union[RunLog, Sequence[RunLog]], out_dir: Union[str, Path],
                 prefix: str = "") -> PlotResult:
    """Write energy, trajectory and brake-timeline SVGs for one or more logs."""
    if isinstance(logs, RunLog):
        logs = [logs]
    logs = [lg for lg in logs if lg.rows]
    if not logs:
        raise ValueError("no per-tick records to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{prefix}{name}.svg" for name in ("energy", "trajectory", "brakes")}
    plot_energy(logs, paths["energy"])
    markers = plot_trajectory(logs, paths["trajectory"])
    omitted = plot_brakes(logs, paths["brakes"])
    return PlotResult(paths, markers, omitted)
