"""Micro-benchmarks for the control plane.

Four scenarios: codec (compiled framing kernel vs pure-Python fallback),
local RPC (same process, no broker), remote RPC (loopback TCP through the
broker to an agent subprocess), and fanout (one controller commanding n
nodes, per-call cost as n grows).
"""
from __future__ import annotations

import json
import os
import socket
import statistics
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field

from flexctl.agent import Agent
from flexctl.broker import Broker
from flexctl.rpc import CallingContext
from flexctl.simwifi import SimWifiDevice
from flexctl.wire import framing_py
from flexctl.wire.framing import available_backends


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@dataclass
class LatencyReport:
    scenario: str
    samples_ms: list = field(default_factory=list)
    bytes_per_call: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def median_ms(self) -> float:
        return statistics.median(self.samples_ms)

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(self.samples_ms)

    @property
    def p99_ms(self) -> float:
        ordered = sorted(self.samples_ms)
        return ordered[min(len(ordered) - 1, int(0.99 * len(ordered)))]

    def to_dict(self) -> dict:
        doc = {
            "scenario": self.scenario,
            "calls": len(self.samples_ms),
            "median_ms": round(self.median_ms, 4),
            "mean_ms": round(self.mean_ms, 4),
            "p99_ms": round(self.p99_ms, 4),
        }
        if self.bytes_per_call is not None:
            doc["bytes_per_call"] = round(self.bytes_per_call, 1)
        doc.update(self.extra)
        return doc


def bench_codec(iterations: int = 50_000) -> dict:
    """Pack+unpack throughput of each available framing backend."""
    topic = b"evt/BenchmarkEvent"
    header = b'{"event_type":"BenchmarkEvent","format_id":"json1"}'
    payload = b"x" * 512

    results = {}
    for name, module in available_backends().items():
        blob = module.pack_frames(topic, header, payload)
        start = time.perf_counter()
        for _ in range(iterations):
            module.unpack_frames(module.pack_frames(topic, header, payload))
        elapsed = time.perf_counter() - start
        assert module.unpack_frames(blob) == (topic, header, payload)
        results[name] = {
            "iterations": iterations,
            "seconds": round(elapsed, 4),
            "ops_per_sec": round(iterations / elapsed),
        }
    if "cython" in results and "python" in results:
        results["speedup"] = round(
            results["cython"]["ops_per_sec"] / results["python"]["ops_per_sec"], 2
        )
    # make it obvious which module the pure numbers came from
    results["python_module"] = framing_py.__name__
    return results


def _timed_calls(fn, calls: int, warmup: int = 100) -> list:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(calls):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1000)
    return samples


def bench_local(calls: int = 1000) -> LatencyReport:
    """Blocking call to a device module hosted by the same agent, no broker."""
    agent = Agent(name="bench-local")
    device = SimWifiDevice(scan_enabled=False)
    agent.add_device_module(device)
    agent.start()
    try:
        proxy = agent.local_node_proxy().get_device(0)
        samples = _timed_calls(lambda: proxy.get_interfaces(), calls)
    finally:
        agent.stop()
    return LatencyReport("local", samples)


def _agent_config(name: str, uuid: str, pub: int, sub: int) -> dict:
    return {
        "agent": {
            "name": name,
            "uuid": uuid,
            "hello_interval": 0.2,
            "hello_timeout": 2.0,
            "pub": f"tcp://127.0.0.1:{pub}",
            "sub": f"tcp://127.0.0.1:{sub}",
        },
        "modules": {
            "wifi0": {
                "class_name": "SimWifiDevice",
                "device": "phy0",
                "kwargs": {"scan_enabled": False},
            }
        },
    }


def spawn_agent(config: dict) -> subprocess.Popen:
    fd, path = tempfile.mkstemp(suffix=".yaml", prefix="flexctl-bench-")
    with os.fdopen(fd, "w") as fh:
        json.dump(config, fh)  # JSON is valid YAML
    proc = subprocess.Popen(
        [sys.executable, "-m", "flexctl", "agent", "--config", path],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    proc._flexctl_config_path = path  # cleaned up by the caller via stop_agent
    return proc


def stop_agent(proc: subprocess.Popen) -> None:
    proc.terminate()
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
    path = getattr(proc, "_flexctl_config_path", None)
    if path:
        try:
            os.unlink(path)
        except OSError:
            pass


def _wait_for_node(agent: Agent, node_uuid: str, timeout: float = 10.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if agent.has_node(node_uuid):
            return
        time.sleep(0.02)
    raise TimeoutError(f"node {node_uuid} never appeared")


def bench_remote(calls: int = 500) -> LatencyReport:
    """Blocking call over loopback TCP through the broker to another process."""
    pub, sub = free_port(), free_port()
    broker = Broker(f"tcp://127.0.0.1:{pub}", f"tcp://127.0.0.1:{sub}")
    broker.start()
    remote_uuid = "00000000-0000-4000-8000-00000000bee1"
    remote = spawn_agent(_agent_config("bench-remote", remote_uuid, pub, sub))
    local = Agent(
        name="bench-caller",
        pub_uri=f"tcp://127.0.0.1:{pub}",
        sub_uri=f"tcp://127.0.0.1:{sub}",
        hello_interval=0.2,
        hello_timeout=2.0,
    )
    local.start()
    try:
        _wait_for_node(local, remote_uuid)
        proxy = local.node_proxy(remote_uuid).get_device(0)
        before = local.transport_stats()
        samples = _timed_calls(lambda: proxy.get_interfaces(), calls)
        after = local.transport_stats()
        traffic = (after["bytes_sent"] - before["bytes_sent"]) + (
            after["bytes_received"] - before["bytes_received"]
        )
    finally:
        local.stop()
        stop_agent(remote)
        broker.stop()
    # warmup calls are included in the byte counters; fold them in honestly
    return LatencyReport("remote", samples, bytes_per_call=traffic / (calls + 100))


def bench_fanout(node_counts=(1, 4, 16, 32), rounds: int = 20) -> dict:
    """Per-call cost of commanding n nodes at once, for growing n.

    All agents live in this process but talk through real broker sockets, so
    the wire path is exercised while 32 nodes stay affordable on small hosts.
    """
    pub, sub = free_port(), free_port()
    broker = Broker(f"tcp://127.0.0.1:{pub}", f"tcp://127.0.0.1:{sub}")
    broker.start()
    uris = {"pub_uri": f"tcp://127.0.0.1:{pub}", "sub_uri": f"tcp://127.0.0.1:{sub}"}
    controller = Agent(name="fanout-ctl", hello_interval=0.2, hello_timeout=5.0, **uris)
    controller.start()
    workers = []
    results = {}
    try:
        while len(workers) < max(node_counts):
            worker = Agent(
                name=f"fanout-{len(workers)}", hello_interval=0.2, hello_timeout=5.0, **uris
            )
            worker.add_device_module(SimWifiDevice(scan_enabled=False))
            worker.start()
            workers.append(worker)
        for worker in workers:
            _wait_for_node(controller, worker.uuid, timeout=30.0)
        for n in node_counts:
            targets = [
                (w.uuid, controller.node_descriptor(w.uuid)["entities"][0]["uuid"])
                for w in workers[:n]
            ]
            warmup = 3
            per_call = []
            for round_idx in range(rounds + warmup):
                done = threading.Event()
                remaining = [len(targets)]
                lock = threading.Lock()

                def on_result(_value):
                    with lock:
                        remaining[0] -= 1
                        if remaining[0] == 0:
                            done.set()

                start = time.perf_counter()
                for node_uuid, dev_uuid in targets:
                    ctx = CallingContext(
                        operation="get_interfaces",
                        target_node=node_uuid,
                        target_entity=dev_uuid,
                        blocking=False,
                        callback_registered=True,
                    )
                    controller.invoke(ctx, callback=on_result)
                if not done.wait(timeout=30):
                    raise TimeoutError("fanout round did not complete")
                if round_idx >= warmup:
                    per_call.append((time.perf_counter() - start) * 1000 / n)
            results[n] = {
                "median_per_call_ms": round(statistics.median(per_call), 4),
                "min_per_call_ms": round(min(per_call), 4),
                "rounds": rounds,
            }
    finally:
        controller.stop()
        for worker in workers:
            worker.stop()
        broker.stop()
    return results


def run_all(quick: bool = False) -> dict:
    scale = 0.1 if quick else 1.0
    report = {
        "codec": bench_codec(iterations=int(50_000 * scale) or 1000),
        "local": bench_local(calls=int(1000 * scale) or 100).to_dict(),
        "remote": bench_remote(calls=int(500 * scale) or 50).to_dict(),
        "fanout": bench_fanout(rounds=int(20 * scale) or 5),
    }
    return report
