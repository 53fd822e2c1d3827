"""Command line entry point: ``cablesim run|compare|plot|demo``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .baseline import PlanError
from .config import ScenarioConfig, ScenarioError, default_scenario, load_scenario, with_seed
from .harness import (DEFAULT_TIMEOUT, RunFault, RunLog, ScenarioMismatch, compare, landing_x,
                      load_fixture, load_runlog, run, run_pair)

EXIT_OK, EXIT_FAULT, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("cablesim")


def _scenario(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_scenario(args.scenario) if args.scenario else default_scenario()
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=Path, help="key = value scenario file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override sim.seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="simulated seconds before giving up")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cablesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one controller and write its log")
    _add_common(p)
    p.add_argument("--controller", choices=("proposed", "ptp"), default="proposed")
    p.add_argument("--ref-duration", type=float,
                   help="ptp only: duration to match (default: run the proposed controller first)")
    p.add_argument("--reference", type=Path, help="ptp only: proposed log supplying duration and landing x")

    p = sub.add_parser("compare", help="energy tables for a ptp log against a proposed log")
    p.add_argument("ptp_log", type=Path, nargs="?")
    p.add_argument("proposed_log", type=Path, nargs="?")
    p.add_argument("--published", action="store_true", help="compare the published figures instead")
    p.add_argument("--out", type=Path, help="also write report.txt and report.json here")

    p = sub.add_parser("plot", help="render SVG figures from logs")
    p.add_argument("logs", type=Path, nargs="+")
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("demo", help="proposed run, matched ptp run, report and plots")
    _add_common(p)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _scenario(args)
    drop_x: Optional[float] = None
    ref = args.ref_duration
    if args.controller == "ptp":
        if args.reference is not None:
            proposed = load_runlog(args.reference)
            ref = proposed.duration if ref is None else ref
            drop_x = landing_x(proposed)
        elif ref is None:
            log.info("no reference duration given; running the proposed controller first")
            proposed = run(cfg, "proposed", timeout=args.timeout)
            if proposed.failed:
                print(f"reference run failed: {proposed.reason}", file=sys.stderr)
                return EXIT_FAULT
            ref, drop_x = proposed.duration, landing_x(proposed)
    result = run(cfg, args.controller, reference_duration=ref, timeout=args.timeout, drop_x=drop_x)
    csv_path, json_path = result.write(args.out)
    print(f"{result.controller}: duration {result.duration:.3f} s, total {result.total:.2f} J "
          f"-> {csv_path}, {json_path}")
    if result.failed:
        print(f"run failed: {result.reason}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def _report(ptp: RunLog, proposed: RunLog, out: Optional[Path]) -> None:
    report = compare(ptp, proposed)
    text = report.text()
    print(text, end="")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def _cmd_compare(args: argparse.Namespace) -> int:
    if args.published:
        ptp, proposed = load_fixture("ptp"), load_fixture("proposed")
    else:
        if args.ptp_log is None or args.proposed_log is None:
            print("compare needs a ptp log and a proposed log (or --published)", file=sys.stderr)
            return EXIT_CONFIG
        ptp, proposed = load_runlog(args.ptp_log), load_runlog(args.proposed_log)
    _report(ptp, proposed, args.out)
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    from .plotting import render_plots

    logs = [load_runlog(p) for p in args.logs]
    result = render_plots(logs, args.out)
    for p in result.paths.values():
        print(p)
    return EXIT_OK


def _cmd_demo(args: argparse.Namespace) -> int:
    from .plotting import render_plots

    cfg = _scenario(args)
    proposed, ptp = run_pair(cfg, timeout=args.timeout)
    proposed.write(args.out)
    ptp.write(args.out)
    if ptp.failed:
        print(f"ptp run failed: {ptp.reason}", file=sys.stderr)
        return EXIT_FAULT
    _report(ptp, proposed, args.out)
    render_plots([proposed, ptp], args.out)
    print(f"logs, report and figures written to {args.out}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("CABLESIM_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "plot": _cmd_plot, "demo": _cmd_demo}
    try:
        return handlers[args.command](args)
    except (ScenarioError, ScenarioMismatch, PlanError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFault as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
