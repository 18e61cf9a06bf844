import json
import threading

import pytest

from flexctl.broker import Broker, fetch_stats
from flexctl.errors import BindError
from flexctl.transport import SUB_TOPIC, UNSUB_TOPIC, connect, parse_endpoint

from conftest import free_port, wait_until


@pytest.fixture
def broker():
    b = Broker(
        f"tcp://127.0.0.1:{free_port()}",
        f"tcp://127.0.0.1:{free_port()}",
        admin=f"tcp://127.0.0.1:{free_port()}",
    )
    b.start()
    yield b
    b.stop()


def _publisher(broker):
    return connect(*parse_endpoint(broker.frontend))


def _subscriber(broker, *prefixes):
    s = connect(*parse_endpoint(broker.backend))
    for p in prefixes:
        s.send(SUB_TOPIC, b"{}", p)
    return s


def _drain(stream, count, timeout=10.0):
    got = []
    stream._sock.settimeout(timeout)
    while len(got) < count:
        msg = stream.recv()
        if msg is None:
            break
        got.append(msg)
    return got


def test_exact_and_prefix_match(broker):
    sub = _subscriber(broker, b"evt/Ping")
    wild = _subscriber(broker, b"evt/")
    wait_until(lambda: broker.stats()["subscriptions"] == 2)
    pub = _publisher(broker)
    pub.send(b"evt/Ping", b"{}", b"1")
    pub.send(b"evt/Pong", b"{}", b"2")
    assert [m[2] for m in _drain(sub, 1)] == [b"1"]
    assert [m[2] for m in _drain(wild, 2)] == [b"1", b"2"]
    for s in (sub, wild, pub):
        s.close()


def test_no_subscriber_drops(broker):
    pub = _publisher(broker)
    pub.send(b"evt/Nobody", b"{}", b"x")
    wait_until(lambda: broker.stats()["dropped"] >= 1)
    assert broker.stats()["forwarded"] == 0
    pub.close()


def test_fifo_sequence(broker):
    sub = _subscriber(broker, b"evt/Seq")
    wait_until(lambda: broker.stats()["subscriptions"] == 1)
    pub = _publisher(broker)
    for i in range(1000):
        pub.send(b"evt/Seq", b"{}", str(i).encode())
    got = [int(m[2]) for m in _drain(sub, 1000)]
    assert got == list(range(1000))
    sub.close()
    pub.close()


def test_isolation_no_unsubscribed_topics(broker):
    sub = _subscriber(broker, b"evt/Only")
    wait_until(lambda: broker.stats()["subscriptions"] == 1)
    pub = _publisher(broker)
    for topic in (b"evt/Other", b"node/abc", b"evt/Only", b"sys/hello"):
        pub.send(topic, b"{}", topic)
    got = _drain(sub, 1, timeout=3.0)
    assert [m[0] for m in got] == [b"evt/Only"]
    sub.close()
    pub.close()


def test_unsubscribe(broker):
    sub = _subscriber(broker, b"evt/U")
    wait_until(lambda: broker.stats()["subscriptions"] == 1)
    sub.send(UNSUB_TOPIC, b"{}", b"evt/U")
    wait_until(lambda: broker.stats()["subscriptions"] == 0)
    pub = _publisher(broker)
    pub.send(b"evt/U", b"{}", b"x")
    wait_until(lambda: broker.stats()["dropped"] >= 1)
    sub.close()
    pub.close()


def test_stats_counters(broker):
    stats = broker.stats()
    assert stats["forwarded"] == 0 and stats["dropped"] == 0 and stats["subscriptions"] == 0
    sub = _subscriber(broker, b"evt/S")
    wait_until(lambda: broker.stats()["subscriptions"] == 1)
    pub = _publisher(broker)
    for _ in range(10):
        pub.send(b"evt/S", b"{}", b"x")
    _drain(sub, 10)
    assert broker.stats()["forwarded"] >= 10
    sub.close()
    pub.close()


def test_admin_endpoint(broker):
    stats = fetch_stats(broker.admin)
    assert set(stats) >= {"forwarded", "dropped", "subscriptions"}
    assert json.dumps(stats)  # serializable


def test_disconnect_removes_subscriber(broker):
    sub = _subscriber(broker, b"evt/Gone")
    wait_until(lambda: broker.stats()["subscriber_connections"] == 1)
    sub.close()
    wait_until(lambda: broker.stats()["subscriber_connections"] == 0)


def test_bind_error():
    port = free_port()
    first = Broker(f"tcp://127.0.0.1:{port}", f"tcp://127.0.0.1:{free_port()}")
    first.start()
    try:
        clash = Broker(f"tcp://127.0.0.1:{port}", f"tcp://127.0.0.1:{free_port()}")
        with pytest.raises(BindError):
            clash.start()
    finally:
        first.stop()


def test_msg_id_no_duplication(broker):
    # at-most-once: a subscriber sees each published message exactly once
    sub = _subscriber(broker, b"evt/Dup")
    wait_until(lambda: broker.stats()["subscriptions"] == 1)
    pub = _publisher(broker)
    ids = [f"id-{i}".encode() for i in range(200)]
    done = threading.Event()
    for i in ids:
        pub.send(b"evt/Dup", b"{}", i)
    done.set()
    got = [m[2] for m in _drain(sub, 200)]
    assert got == ids
    assert len(set(got)) == len(got)
    sub.close()
    pub.close()
