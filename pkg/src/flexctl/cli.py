"""Command line entry points: broker, agent, topo-dump, bench."""
from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import time

from flexctl.errors import FlexctlError


def _setup_logging(verbose: bool) -> None:
    level_name = os.environ.get("FLEXCTL_LOG", "DEBUG" if verbose else "INFO")
    logging.basicConfig(
        level=getattr(logging, level_name.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _install_stop_handlers(stop) -> None:
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda signum, frame: stop())


def _cmd_broker(args) -> int:
    from flexctl.broker import Broker

    broker = Broker(args.frontend, args.backend, hwm=args.hwm, admin=args.admin)
    broker.start()
    _install_stop_handlers(broker.stop)
    broker.wait()
    return 0


def _cmd_agent(args) -> int:
    from flexctl.config import agent_from_file

    agent = agent_from_file(args.config)
    agent.start()
    running = [True]

    def stop():
        running[0] = False

    _install_stop_handlers(stop)
    try:
        while running[0]:
            time.sleep(0.1)
    finally:
        agent.stop()
    return 0


def _cmd_topo_dump(args) -> int:
    """Run an agent from config, wait, and dump the topology monitor's graph."""
    from flexctl.config import agent_from_file
    from flexctl.rpc import CallingContext
    from flexctl.topology import TopologyMonitor

    agent = agent_from_file(args.config)
    monitor = next(
        (a for a in agent.get_control_applications() if isinstance(a, TopologyMonitor)), None
    )
    if monitor is None:
        monitor = TopologyMonitor()
        agent.add_control_application(monitor)
    agent.start()
    try:
        time.sleep(args.wait)
        graph = agent.invoke(
            CallingContext(
                operation="get_topology",
                target_node=agent.uuid,
                target_entity=monitor.uuid,
            )
        )
    finally:
        agent.stop()
    out = json.dumps(graph, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return 0


def _cmd_bench(args) -> int:
    from flexctl import bench

    if args.scenario == "all":
        report = bench.run_all(quick=args.quick)
    elif args.scenario == "codec":
        report = bench.bench_codec(iterations=5000 if args.quick else 50_000)
    elif args.scenario == "local":
        report = bench.bench_local(calls=100 if args.quick else 1000).to_dict()
    elif args.scenario == "remote":
        report = bench.bench_remote(calls=50 if args.quick else 500).to_dict()
    else:
        report = bench.bench_fanout(rounds=5 if args.quick else 20)
    out = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexctl", description="wireless control-plane middleware")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("broker", help="run a standalone message broker")
    p.add_argument("--frontend", required=True, help="publisher endpoint, e.g. tcp://127.0.0.1:5560")
    p.add_argument("--backend", required=True, help="subscriber endpoint")
    p.add_argument("--admin", help="optional stats endpoint")
    p.add_argument("--hwm", type=int, default=10_000, help="per-subscriber high-water mark")
    p.set_defaults(fn=_cmd_broker)

    p = sub.add_parser("agent", help="run an agent from a YAML configuration")
    p.add_argument("--config", required=True, help="path to the node configuration file")
    p.set_defaults(fn=_cmd_agent)

    p = sub.add_parser("topo-dump", help="write the current hearing-map graph as JSON")
    p.add_argument("--config", required=True, help="agent configuration file")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--wait", type=float, default=5.0, help="seconds to collect reports")
    p.set_defaults(fn=_cmd_topo_dump)

    p = sub.add_parser("bench", help="run micro-benchmarks")
    p.add_argument("scenario", choices=["all", "codec", "local", "remote", "fanout"], nargs="?", default="all")
    p.add_argument("--quick", action="store_true", help="smaller iteration counts")
    p.add_argument("--output", help="also write the JSON report to this file")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.fn(args)
    except FlexctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
