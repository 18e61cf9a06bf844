import time

import pytest

from flexctl.entities import ControlApplication
from flexctl.errors import EntityUnknown, UnsupportedOperation
from flexctl.simwifi import SimWifiDevice

from conftest import wait_until


class HostApp(ControlApplication):
    """Runs on the calling side; used as the owner of proxies."""

    def __init__(self):
        super().__init__(name="host")
        self.events = []


class EchoApp(ControlApplication):
    def __init__(self):
        super().__init__(name="echo-app")
        self.bind_operation("echo", lambda v: v)


def _two_nodes(cluster):
    a = cluster.agent("a")
    b = cluster.agent("b")
    host = HostApp()
    a.add_control_application(host)
    b.add_device_module(SimWifiDevice(name="wifi", scan_enabled=False, interfaces=["wlan0"]))
    b.add_device_module(SimWifiDevice(name="wifi2", device="phy1", scan_enabled=False, seed=1))
    b.add_control_application(EchoApp())
    cluster.start_all()
    cluster.wait_mesh()
    return a, b, host


def test_entity_accessors(cluster):
    a, b, host = _two_nodes(cluster)
    node = a.node_proxy(b.uuid, owner=host)
    devices = node.get_devices()
    assert len(devices) == 2
    assert node.get_device(0).uuid == devices[0].uuid
    assert node.get_device(devices[1].uuid).name == devices[1].name
    with pytest.raises(EntityUnknown):
        node.get_device(5)
    with pytest.raises(EntityUnknown):
        node.get_device("not-a-uuid")
    assert node.get_protocols() == []
    apps = node.get_control_applications()
    assert [p.name for p in apps] == ["echo-app"]


def test_remote_call_and_alias_chain(cluster):
    a, b, host = _two_nodes(cluster)
    device = a.node_proxy(b.uuid, owner=host).get_device(0)
    assert device.set_channel(11) is True
    assert device.get_channel() == 11
    # unified-interface dotted alias dispatch
    assert device.radio.set_channel(3) is True
    assert device.radio.get_channel() == 3
    with pytest.raises(UnsupportedOperation):
        device.radio_typo.set_channel(1)


def test_app_proxy_operation_and_lifecycle(cluster):
    a, b, host = _two_nodes(cluster)
    app = a.node_proxy(b.uuid, owner=host).get_control_application(0)
    assert app.echo("marco") == "marco"
    assert app.is_running() is True
    assert app.stop() is True
    assert app.is_running() is False
    assert app.start() is True
    assert app.start() is True  # idempotent
    assert app.is_running() is True


def test_proxy_event_subscription_discrimination(cluster):
    a, b, host = _two_nodes(cluster)
    node = a.node_proxy(b.uuid, owner=host)
    dev0, dev1 = node.get_devices()
    got = []
    assert dev0.subscribe_for_events("SpectralScanSampleEvent", lambda p, n, e: got.append(e)) is True
    # both remote devices emit; only dev0's samples must arrive
    for dev in b.get_device_modules():
        dev.observe_once()
    wait_until(lambda: len(got) >= 1)
    time.sleep(0.3)
    assert set(got) == {dev0.uuid}
    assert dev0.unsubscribe_from_events() is True
    for dev in b.get_device_modules():
        dev.observe_once()
    time.sleep(0.3)
    assert set(got) == {dev0.uuid}


def test_node_proxy_wildcard_subscription(cluster):
    a, b, host = _two_nodes(cluster)
    node = a.node_proxy(b.uuid, owner=host)
    got = []
    assert node.subscribe_for_events(None, lambda p, n, e: got.append(p)) is True
    b.get_device_modules()[0].observe_once()
    wait_until(lambda: len(got) >= 1)


def test_node_send_event_reaches_remote_apps(cluster):
    a, b, host = _two_nodes(cluster)
    received = []
    listener = ControlApplication(name="listener")
    # global mode: accept any origin; the node-broadcast addressing already
    # restricts the audience to node b
    listener.subscribe_for_events("PokeEvent", lambda p, n, e: received.append(p))
    b.add_control_application(listener)
    listener.start(b)
    outsider_hits = []
    outsider = ControlApplication(name="outsider")
    outsider.subscribe_for_events("PokeEvent", lambda p, n, e: outsider_hits.append(p))
    a.add_control_application(outsider)
    outsider.start(a)
    node = a.node_proxy(b.uuid, owner=host)
    assert node.send_event("PokeEvent", {"x": 1}) is True
    wait_until(lambda: received == [{"x": 1}])
    time.sleep(0.2)
    assert outsider_hits == []  # audience was node b only


def test_unicast_via_entity_proxy(cluster):
    a, b, host = _two_nodes(cluster)
    echo = next(e for e in b.get_control_applications() if e.name == "echo-app")
    hits = []
    echo.subscribe_for_events("DirectEvent", lambda p, n, e: hits.append(p))
    bystander_hits = []
    bystander = ControlApplication(name="bystander")
    bystander.subscribe_for_events("DirectEvent", lambda p, n, e: bystander_hits.append(p))
    b.add_control_application(bystander)
    bystander.start(b)
    proxy = a.node_proxy(b.uuid, owner=host).get_control_application(0)
    assert proxy.send_event("DirectEvent", 42) is True
    wait_until(lambda: hits == [42])
    time.sleep(0.2)
    assert bystander_hits == []  # unicast reaches exactly one entity


def test_time_introspection(cluster):
    a = cluster.agent("a")
    b = cluster.agent("b", time_source="ntp:pool", time_synchronizing=True, time_accuracy_ms=5.0)
    cluster.start_all()
    cluster.wait_mesh()
    node = a.node_proxy(b.uuid)
    info = node.time_info()
    assert info["synchronizing"] is True
    assert info["source"] == "ntp:pool"
    assert info["accuracy_ms"] == 5.0
    assert abs(info["time"] - a.now_ms()) < 1000  # same host clock

    local = a.local_node_proxy()
    assert local.is_synchronizing() is False
    assert local.get_time_synchronization_source() == "none"


def test_local_node_proxy_is_local(cluster):
    a = cluster.agent("a")
    host = HostApp()
    a.add_control_application(host)
    cluster.start_all()
    assert host.get_local_node().local is True
