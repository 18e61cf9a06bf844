import threading
import time

import pytest

from flexctl.agent import Agent
from flexctl.entities import (
    ControlApplication,
    DeviceModule,
    SerialInbox,
    bind_function,
    on_event,
)
from flexctl.errors import DuplicateBinding, NotStarted

from conftest import wait_until


class Recorder(ControlApplication):
    def __init__(self, name=None):
        super().__init__(name=name)
        self.seen = []
        self.started = 0
        self.stopped = 0
        self.overlaps = 0
        self._inside = False

    @on_event("PingEvent")
    def _on_ping(self, payload, src_node, src_entity):
        if self._inside:
            self.overlaps += 1
        self._inside = True
        time.sleep(0.002)
        self.seen.append(payload)
        self._inside = False

    def on_start(self):
        self.started += 1

    def on_stop(self):
        self.stopped += 1


class EchoDevice(DeviceModule):
    def __init__(self, name=None, device="phy0"):
        super().__init__(name=name, device=device)
        self.value = 0

    @bind_function("set_value")
    def set_value(self, v):
        self.value = v
        return True

    @bind_function("get_value")
    def get_value(self):
        return self.value

    @bind_function("radio.get_value")
    def _alias(self):
        return self.get_value()


def test_descriptor_fidelity():
    d = EchoDevice(name="echo")
    assert d.descriptor()["operations"] == ["get_value", "radio.get_value", "set_value"]
    assert d.descriptor()["kind"] == "device"
    assert d.descriptor()["device_name"] == "phy0"
    d.bind_operation("extra", lambda: 1)
    assert "extra" in d.descriptor()["operations"]


def test_duplicate_binding():
    d = EchoDevice()
    with pytest.raises(DuplicateBinding):
        d.bind_operation("get_value", lambda: 2)


def test_standalone_module_usable():
    # no agent anywhere: plain method calls must work
    d = EchoDevice()
    assert d.set_value(9) is True
    assert d.get_value() == 9


def test_send_before_start():
    app = Recorder()
    with pytest.raises(NotStarted):
        app.send_event("PingEvent", {"n": 1})


def test_lifecycle_hooks_once():
    agent = Agent(name="solo")
    app = Recorder()
    agent.add_control_application(app)
    agent.start()
    agent.stop()
    wait_until(lambda: app.stopped == 1)
    assert app.started == 1


def test_serial_delivery_no_overlap():
    agent = Agent(name="solo")
    app = Recorder()
    sender = Recorder(name="sender")
    agent.add_control_application(app)
    agent.add_control_application(sender)
    agent.start()
    try:
        for i in range(50):
            sender.send_event("PingEvent", i)
        wait_until(lambda: len(app.seen) == 50)
        assert app.overlaps == 0
        assert app.seen == list(range(50))  # per-entity order preserved
    finally:
        agent.stop()


def test_wildcard_and_unsubscribe():
    agent = Agent(name="solo")
    got = []
    app = ControlApplication(name="listener")
    app.subscribe_for_events(None, lambda p, n, e: got.append(p))
    sender = ControlApplication(name="sender")
    agent.add_control_application(app)
    agent.add_control_application(sender)
    agent.start()
    try:
        sender.send_event("AEvent", 1)
        sender.send_event("BEvent", 2)
        wait_until(lambda: len(got) == 2)
        assert app.unsubscribe_from_events() is True
        sender.send_event("AEvent", 3)
        time.sleep(0.2)
        assert got == [1, 2]
    finally:
        agent.stop()


def test_stopped_app_delivery_frozen():
    agent = Agent(name="solo")
    app = Recorder()
    sender = Recorder(name="sender")
    agent.add_control_application(app)
    agent.add_control_application(sender)
    agent.start()
    try:
        sender.send_event("PingEvent", 1)
        wait_until(lambda: len(app.seen) == 1)
        app.stop()
        sender.send_event("PingEvent", 2)
        time.sleep(0.2)
        assert len(app.seen) == 1
    finally:
        agent.stop()


def test_failing_hook_marks_entity_failed():
    class Bad(ControlApplication):
        def on_start(self):
            raise RuntimeError("boom")

    agent = Agent(name="solo")
    bad = Bad()
    agent.add_control_application(bad)
    agent.start()
    try:
        wait_until(lambda: bad._failed)
        assert agent.is_running
    finally:
        agent.stop()


def test_inbox_drop_oldest():
    box = SerialInbox(maxsize=3)
    for i in range(5):
        box.put(i)
    assert box.dropped == 2
    assert [box.get() for _ in range(3)] == [2, 3, 4]


def test_serial_inbox_threadsafe():
    box = SerialInbox(maxsize=10_000)
    def feed(base):
        for i in range(500):
            box.put(base + i)
    threads = [threading.Thread(target=feed, args=(b * 1000,)) for b in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    got = [box.get() for _ in range(2000)]
    assert len(got) == 2000 and box.dropped == 0
