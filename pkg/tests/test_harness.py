import json
import subprocess
import sys

import numpy as np
import pytest

from cablesim.cli import main
from cablesim.config import MOTORS, default_scenario
from cablesim.harness import (CSV_COLUMNS, ScenarioMismatch, compare, load_fixture, load_runlog,
                              run)
from cablesim.plotting import render_plots
from cablesim.supervisor import PHASE_COLUMN


def cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "cablesim", *args], capture_output=True, text=True,
                          cwd=cwd)


def test_same_seed_gives_identical_files(tmp_path):
    for d in ("a", "b"):
        res = cli("run", "--seed", "3", "--out", str(tmp_path / d))
        assert res.returncode == 0, res.stderr
    for name in ("proposed.csv", "proposed.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seeds_differ():
    a = run(default_scenario().with_overrides(**{"sim.seed": 1}))
    b = run(default_scenario().with_overrides(**{"sim.seed": 2}))
    assert a.csv_text() != b.csv_text()


def column_energy_oracle(runlog, columns_of):
    """Per-column motor energy re-derived from the logged powers."""
    dt = runlog.header["dt"]
    phases = runlog.column("phase")
    out = {}
    for m in MOTORS:
        p = np.maximum(runlog.column(f"{m}_power"), 0.0)
        prev = np.concatenate([[0.0], p[:-1]])
        tick = 0.5 * (p + prev) * dt
        for ph in set(phases):
            c = columns_of(ph)
            out.setdefault(c, {}).setdefault(m, 0.0)
            out[c][m] += float(tick[phases == ph].sum())
    return out


def test_proposed_table_cells_rederive_from_the_log(proposed_log):
    names = {ph.value: col for ph, col in PHASE_COLUMN.items()}
    oracle = column_energy_oracle(proposed_log, names.__getitem__)
    table = proposed_log.summary["phase_energy"]
    for c, per_motor in oracle.items():
        for m, e in per_motor.items():
            assert table[c][m] == pytest.approx(e, abs=1e-6)


def test_ptp_table_cells_rederive_from_the_log(ptp_log):
    oracle = column_energy_oracle(ptp_log, lambda ph: ph)
    table = ptp_log.summary["phase_energy"]
    assert set(oracle) == set(ptp_log.summary["columns"])
    for c, per_motor in oracle.items():
        for m, e in per_motor.items():
            assert table[c][m] == pytest.approx(e, abs=1e-6)


def test_brake_cells_are_power_times_energized_time(proposed_log, ptp_log):
    for lg in (proposed_log, ptp_log):
        dt = lg.header["dt"]
        for m in MOTORS:
            ticks = int(np.count_nonzero(lg.column(f"brake_{m}_energized")))
            assert lg.summary["brake_on_ticks"][m] == ticks
            assert lg.summary["brake_energy"][m] == lg.summary["brake_power"][m] * ticks * dt


def test_cumulative_energies_never_decrease(proposed_log, ptp_log):
    for lg in (proposed_log, ptp_log):
        for name in [f"E_{m}" for m in MOTORS] + [f"E_brake_{m}" for m in MOTORS] + ["E_total"]:
            assert np.all(np.diff(lg.column(name)) >= -1e-12), name
        assert lg.column("E_total")[-1] == pytest.approx(lg.total)


def test_log_roundtrip(tmp_path, proposed_log):
    csv_path, json_path = proposed_log.write(tmp_path)
    assert csv_path.read_text().splitlines()[0].split(",") == list(CSV_COLUMNS)
    again = load_runlog(json_path)
    assert again.summary == json.loads(json.dumps(proposed_log.summary))
    assert again.event_ids() == proposed_log.event_ids()
    assert len(again.rows) == len(proposed_log.rows)
    assert again.column("x") == pytest.approx(proposed_log.column("x"), rel=1e-8)
    assert again.csv_text() == proposed_log.csv_text()


def test_published_figures_reproduce_the_reported_totals():
    report = compare(load_fixture("ptp"), load_fixture("proposed"))
    assert report.grand_totals["ptp"] == pytest.approx(1054.08, abs=0.005)
    assert report.grand_totals["proposed"] == pytest.approx(723.74, abs=0.005)
    assert round(100 * report.savings, 1) == 31.3
    assert report.largest_saving_column == "2-3"
    assert report.cumulative["ptp"]["6-7"] == pytest.approx(674.54)
    assert report.cumulative["proposed"]["6-7"] == pytest.approx(428.38)
    assert "savings 31.3%" in report.text()


def test_self_comparison_saves_nothing(proposed_log):
    report = compare(proposed_log, proposed_log)
    assert report.savings == 0.0
    assert all(v == 0.0 for v in report.column_savings.values())


def test_comparison_merges_the_baseline_span(proposed_log, ptp_log):
    report = compare(ptp_log, proposed_log)
    assert list(report.column_savings) == ["1-2", "2-3", "3-5", "5-6", "6-7"]
    assert sum(report.column_savings.values()) == pytest.approx(
        report.motor_totals["ptp"] - report.motor_totals["proposed"], abs=1e-9)


def test_mismatched_scenarios_are_refused(proposed_log):
    other = run(default_scenario().with_overrides(**{"sim.seed": 9}), record=False)
    with pytest.raises(ScenarioMismatch):
        compare(other, proposed_log)


def test_plots_mark_every_event_and_skip_idle_brakes(tmp_path, proposed_log, ptp_log):
    result = render_plots([proposed_log, ptp_log], tmp_path)
    assert result.markers == {"proposed": 7, "ptp": 6}
    assert result.omitted_brakes["proposed"] == ["left"]
    assert result.omitted_brakes["ptp"] == list(MOTORS)
    for path in result.paths.values():
        text = path.read_text()
        assert text.startswith("<?xml") and "</svg>" in text
    assert "always energized" in result.paths["brakes"].read_text()
    first = {k: p.read_bytes() for k, p in result.paths.items()}
    again = render_plots([proposed_log, ptp_log], tmp_path)
    assert {k: p.read_bytes() for k, p in again.paths.items()} == first


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("payload.mass = 0\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert "payload.mass" in capsys.readouterr().err
    assert main(["run", "--timeout", "0.5", "--out", str(tmp_path / "t")]) == 1
    assert main(["compare"]) == 2
    assert main(["compare", "--published", "--out", str(tmp_path / "r")]) == 0
    assert "savings 31.3%" in capsys.readouterr().out
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["savings"] == pytest.approx(0.313, abs=5e-4)
    assert main(["plot", str(tmp_path / "missing.json")]) == 2


def test_cli_ptp_from_a_reference_log(tmp_path):
    assert main(["run", "--out", str(tmp_path)]) == 0
    assert main(["run", "--controller", "ptp", "--reference", str(tmp_path / "proposed.json"),
                 "--out", str(tmp_path)]) == 0
    assert main(["compare", str(tmp_path / "ptp.json"), str(tmp_path / "proposed.json")]) == 0
    assert main(["plot", str(tmp_path / "proposed.json"), str(tmp_path / "ptp.json"),
                 "--out", str(tmp_path / "fig")]) == 0
    assert (tmp_path / "fig" / "trajectory.svg").exists()
