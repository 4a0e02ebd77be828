"""Command-line entry points: run, serve, replay, bench.

Exit codes: 0 = run met with a clean solve record, 2 = validation problem
(message names the offending field), 3 = run finished but missed the meet
or logged solver failures (partial logs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .robot import ModelError
from .simulation import (ScenarioError, bundled_scenario, load_runlog_csv,
                         load_scenario, run_scenario)

log = logging.getLogger("handover.cli")

BUNDLED = ("s1", "s2", "s3", "s4")


def _configure_logging():
    name = os.environ.get("HANDOVER_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load(ref: str, seed=None, duration=None):
    scenario = bundled_scenario(ref) if ref in BUNDLED else load_scenario(ref)
    if seed is not None:
        scenario.seed = seed
    if duration is not None:
        if duration <= 0.0:
            raise ScenarioError("duration: must be positive")
        scenario.duration = duration   # may cut the run short of the hand motion
    return scenario


def cmd_run(args) -> int:
    try:
        scenario = _load(args.scenario, args.seed, args.duration)
    except (ScenarioError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rl = run_scenario(scenario)
    rl.to_csv(out / "run.csv")
    rl.metrics_json(out / "metrics.json")
    m = rl.metrics
    print(f"{scenario.name or args.scenario}: meet={m['meet']} "
          f"meet_time={m['meet_time']} solver_failures={m['solver_failures']} "
          f"constraint_violations={m['constraint_violations']} -> {out}")
    return 0 if m["meet"] and m["solver_failures"] == 0 else 3


def cmd_serve(args) -> int:
    from .server import LiveSession, build_app

    try:
        _load(args.scenario, args.seed, args.duration)     # validate up front
    except (ScenarioError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    session = LiveSession(
        lambda: _load(args.scenario, args.seed, args.duration),
        realtime_scale=args.realtime_scale)
    return _serve_app(build_app(session, ui_dir=args.ui), args)


def cmd_replay(args) -> int:
    from .server import ReplaySession, build_app

    try:
        rl = load_runlog_csv(args.log)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    session = ReplaySession(rl, speed=args.speed)
    return _serve_app(build_app(session), args)


def _serve_app(app, args) -> int:
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_bench(args) -> int:
    """Median/worst control-cycle latency at a representative operating point."""
    from .controller import Controller
    from .observer import FullState, observer_error_state
    from .tracking import grasp_frame_state

    scenario = bundled_scenario("s1")
    ctl = Controller(scenario.model, scenario.config)
    q = scenario.initial.q.copy()
    qdot = np.full(scenario.model.n, 0.1)
    hand = scenario.hand.state(0.5)
    s_obs = FullState(hand.pose, hand.twist, hand.accel)
    eta = observer_error_state(s_obs, scenario.hand.state(0.45).pose)
    s_grasp = grasp_frame_state(s_obs, scenario.grasp)

    times = np.empty(args.cycles)
    for i in range(args.cycles):
        t0 = time.perf_counter()
        ctl.control_cycle(q, qdot, eta, s_grasp, scenario.grasp)
        times[i] = time.perf_counter() - t0
    ms = np.sort(times * 1e3)
    stats = {"cycles": int(args.cycles),
             "median_ms": round(float(np.median(ms)), 4),
             "p90_ms": round(float(ms[int(0.9 * len(ms))]), 4),
             "max_ms": round(float(ms[-1]), 4)}
    print(json.dumps(stats))
    return 0


def main(argv=None) -> int:
    _configure_logging()
    parser = argparse.ArgumentParser(
        prog="handover",
        description="Handover controller simulator and steering service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario headless, export CSV + metrics")
    p.add_argument("--scenario", required=True,
                   help=f"scenario file or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None,
                   help="override the scenario duration [s]")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="run live with WebSocket steering")
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--realtime-scale", type=float, default=1.0,
                   help="simulated seconds per wall second (0 = unpaced)")
    p.add_argument("--ui", default=None, help="static UI bundle directory")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="re-broadcast a recorded run")
    p.add_argument("--log", required=True, help="run.csv from a previous run")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--speed", type=float, default=1.0)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("bench", help="time the controller cycle")
    p.add_argument("--cycles", type=int, default=2000)
    p.set_defaults(fn=cmd_bench)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
