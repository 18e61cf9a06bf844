import json
import signal
import subprocess
import sys
import textwrap
import time

from flexctl.cli import main

from conftest import free_port, wait_until


def test_agent_missing_config(capsys):
    assert main(["agent", "--config", "/nope/missing.yaml"]) == 2
    assert "missing.yaml" in capsys.readouterr().err


def test_broker_busy_port(capsys):
    from flexctl.broker import Broker

    port = free_port()
    holder = Broker(f"tcp://127.0.0.1:{port}", f"tcp://127.0.0.1:{free_port()}")
    holder.start()
    try:
        rc = main(
            [
                "broker",
                "--frontend",
                f"tcp://127.0.0.1:{port}",
                "--backend",
                f"tcp://127.0.0.1:{free_port()}",
            ]
        )
        assert rc == 2
        assert "bind" in capsys.readouterr().err.lower()
    finally:
        holder.stop()


def test_bad_endpoint(capsys):
    assert main(["broker", "--frontend", "udp://x", "--backend", "tcp://h:1"]) == 2


def _write_agent_config(tmp_path, pub, sub, name="cli-node"):
    path = tmp_path / "node.yaml"
    path.write_text(
        textwrap.dedent(
            f"""
            agent:
              name: {name}
              pub: "tcp://127.0.0.1:{pub}"
              sub: "tcp://127.0.0.1:{sub}"
              hello_interval: 0.2
              hello_timeout: 2.0
            modules:
              wifi0:
                class_name: SimWifiDevice
                device: phy0
                kwargs:
                  scan_enabled: false
            """
        )
    )
    return path


def test_agent_subprocess_sigint_clean_exit(tmp_path):
    from flexctl.broker import Broker

    pub, sub = free_port(), free_port()
    broker = Broker(f"tcp://127.0.0.1:{pub}", f"tcp://127.0.0.1:{sub}")
    broker.start()
    config = _write_agent_config(tmp_path, pub, sub)
    proc = subprocess.Popen(
        [sys.executable, "-m", "flexctl", "agent", "--config", str(config)],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    try:
        # the agent is up once its hello reaches the broker
        from flexctl.agent import Agent

        observer = Agent(
            name="observer",
            pub_uri=f"tcp://127.0.0.1:{pub}",
            sub_uri=f"tcp://127.0.0.1:{sub}",
            hello_interval=0.2,
            hello_timeout=2.0,
        )
        observer.start()
        wait_until(lambda: len(observer.known_nodes()) == 1, timeout=15)
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0
        observer.stop()
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
        broker.stop()


def test_topo_dump_writes_graph(tmp_path, capsys):
    from flexctl.broker import Broker

    pub, sub = free_port(), free_port()
    broker = Broker(f"tcp://127.0.0.1:{pub}", f"tcp://127.0.0.1:{sub}")
    broker.start()
    config = _write_agent_config(tmp_path, pub, sub, name="dumper")
    out = tmp_path / "graph.json"
    try:
        rc = main(
            ["topo-dump", "--config", str(config), "--out", str(out), "--wait", "0.3"]
        )
        assert rc == 0
        graph = json.loads(out.read_text())
        assert set(graph) == {"nodes", "edges", "metadata"}
    finally:
        broker.stop()


def test_bench_codec_cli(tmp_path, capsys):
    out = tmp_path / "codec.json"
    rc = main(["bench", "codec", "--quick", "--output", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert "python" in report
    assert report["python"]["ops_per_sec"] > 0
