"""Command-line entry points.

    v2x run <scenario>     execute a scenario, write logs and metrics
    v2x serve              run the base-station service
    v2x replay <log>       re-feed a recorded log to a base station

Exit codes are part of the contract: 0 success, 1 runtime error,
2 scenario-validation failure.
"""

import argparse
import json
import os
import sys
import threading
import time
from dataclasses import replace

from .metrics import MetricsReport
from .scenario import Scenario, ScenarioError
from . import sim

DEFAULT_LISTEN = "127.0.0.1:8750"


def _feed_filename(label: str) -> str:
    return label.replace(":", "-") + ".ndjson"


def _parse_listen(value: str):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {value!r}")
    return host, int(port)


def _start_embedded_base(listen: str, token):
    """Serve a fresh RegionView in a daemon thread; returns the view."""
    import uvicorn

    from .basestation import RegionView, create_app

    view = RegionView()
    host, port = _parse_listen(listen)
    config = uvicorn.Config(create_app(view, token=token), host=host,
                            port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError(f"embedded base station failed to bind {listen}")
        time.sleep(0.02)
    return view


def cmd_run(args) -> int:
    try:
        scenario = Scenario.from_file(args.scenario)
    except ScenarioError as e:
        print("scenario validation failed:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot load scenario: {e}", file=sys.stderr)
        return 2

    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed,
                           channel=replace(scenario.channel, seed=args.seed))

    token = args.token or os.environ.get("V2X_TOKEN")
    base = None
    view = None
    if args.embedded_base:
        view = _start_embedded_base(args.listen, token)
        base = sim._InlineBase(view)
        print(f"embedded base station on http://{args.listen}", file=sys.stderr)
    elif args.base:
        base = args.base

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    feeds_dir = os.path.join(out_dir, "feeds")
    os.makedirs(feeds_dir, exist_ok=True)

    # paced runs stream feed files line by line so a live consumer (the
    # console e2e, an operator tailing the file) sees entries as they land
    feed_handles = {}
    on_feed = None
    if args.paced:
        def on_feed(label, entry):
            fh = feed_handles.get(label)
            if fh is None:
                path = os.path.join(feeds_dir, _feed_filename(label))
                fh = open(path, "w", encoding="utf-8", buffering=1)
                feed_handles[label] = fh
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")

    result = sim.run(scenario, collect_events=True, base=base,
                     pace=1.0 if args.paced else 0.0, token=token,
                     on_feed=on_feed)
    for fh in feed_handles.values():
        fh.close()

    events_path = os.path.join(out_dir, "events.ndjson")
    with open(events_path, "w", encoding="utf-8") as fh:
        fh.write(result.events_ndjson())

    report = MetricsReport.from_records(result.records)
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_loss_csv())
    with open(os.path.join(out_dir, "alerts.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_alerts_csv())

    for label, entries in result.feeds.items():
        path = os.path.join(feeds_dir, _feed_filename(label))
        with open(path, "w", encoding="utf-8") as fh:
            for e in entries:
                fh.write(json.dumps(e, separators=(",", ":")) + "\n")

    c = result.counters
    print(f"{scenario.name}: {c['tx']} tx, {c['rx']} rx, {c['drop']} dropped, "
          f"{c['alerts_raised']} alerts raised, {c['feed_entries']} feed "
          f"entries, {c['reports']} reports")
    print(f"wrote {events_path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .basestation import RegionView, create_app

    token = args.token or os.environ.get("V2X_TOKEN")
    try:
        host, port = _parse_listen(args.listen)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 1

    static_dir = args.console_dir
    if static_dir is None and os.path.isdir("frontend/dist"):
        static_dir = "frontend/dist"

    view = RegionView(auto_confirm=args.auto_confirm,
                      persist_path=args.persist)
    app = create_app(view, token=token, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level=args.log_level)
    except (OSError, SystemExit) as e:
        print(f"serve failed: {e}", file=sys.stderr)
        return 1
    finally:
        view.close()
    return 0


def cmd_replay(args) -> int:
    import requests

    token = args.token or os.environ.get("V2X_TOKEN")
    reports = []
    try:
        with open(args.log, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    print(f"parse error at line {i}: {e.msg}", file=sys.stderr)
                    return 1
                if not isinstance(rec, dict) or "kind" not in rec:
                    print(f"parse error at line {i}: not an event record",
                          file=sys.stderr)
                    return 1
                if rec["kind"] == "BASE_REPORT":
                    reports.append((rec["t"], rec["detail"]))
    except OSError as e:
        print(f"cannot read log: {e}", file=sys.stderr)
        return 1

    if not reports:
        print("log contains no BASE_REPORT records", file=sys.stderr)
        return 0

    session = requests.Session()
    if token:
        session.headers["Authorization"] = f"Bearer {token}"
    url = args.base.rstrip("/") + "/ingest"

    start_t = reports[0][0]
    wall0 = time.monotonic()
    sent = 0
    i = 0
    try:
        while i < len(reports):
            t = reports[i][0]
            target = wall0 + ((t - start_t) / 1000.0) / args.speed
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            batch = []
            while i < len(reports) and reports[i][0] == t:
                batch.append(json.dumps(reports[i][1], separators=(",", ":")))
                i += 1
            resp = session.post(url, data=("\n".join(batch) + "\n").encode(),
                                headers={"Content-Type": "application/x-ndjson"},
                                timeout=10)
            resp.raise_for_status()
            sent += len(batch)
    except requests.RequestException as e:
        print(f"replay failed after {sent} reports: {e}", file=sys.stderr)
        return 1
    print(f"replayed {sent} reports to {args.base}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2x",
        description="V2X emergency-alert simulator and base-station tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="path to a *.scenario.json file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", default="out",
                       help="output directory (default: ./out)")
    p_run.add_argument("--paced", action="store_true",
                       help="pace the loop to wall clock (1 tick per 100 ms)")
    p_run.add_argument("--base", default=None,
                       help="base-station URL for report delivery")
    p_run.add_argument("--embedded-base", action="store_true",
                       help="serve a base station in-process during the run")
    p_run.add_argument("--listen", default=DEFAULT_LISTEN,
                       help="embedded base listen address (host:port)")
    p_run.add_argument("--token", default=None,
                       help="bearer token (or env V2X_TOKEN)")
    p_run.set_defaults(func=cmd_run)

    p_serve = sub.add_parser("serve", help="run the base-station service")
    p_serve.add_argument("--listen", default=DEFAULT_LISTEN,
                         help=f"listen address (default {DEFAULT_LISTEN})")
    p_serve.add_argument("--token", default=None,
                         help="require this bearer token (or env V2X_TOKEN)")
    p_serve.add_argument("--persist", default=None,
                         help="append-only JSONL state file, restored on start")
    p_serve.add_argument("--auto-confirm", action="store_true",
                         help="promote auto-detected blockage advisories "
                              "without operator confirmation")
    p_serve.add_argument("--console-dir", default=None,
                         help="static console assets (default: frontend/dist "
                              "when present)")
    p_serve.add_argument("--log-level", default="info")
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay",
                              help="re-feed a recorded event log to a base")
    p_replay.add_argument("log", help="events.ndjson from a previous run")
    p_replay.add_argument("--speed", type=float, default=1.0,
                          help="replay speed multiplier (default 1.0)")
    p_replay.add_argument("--base", required=True, help="base-station URL")
    p_replay.add_argument("--token", default=None,
                          help="bearer token (or env V2X_TOKEN)")
    p_replay.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "paced", False) and not (args.base or args.embedded_base):
        parser.error("--paced requires --base URL or --embedded-base")
    if getattr(args, "base", None) and getattr(args, "embedded_base", False):
        parser.error("--base and --embedded-base are mutually exclusive")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # contract: runtime failures exit 1, not traceback
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
