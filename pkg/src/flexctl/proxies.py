"""Client-side stand-ins for remote (and local) nodes and entities.

Proxies give control applications one calling syntax regardless of where the
target lives: operations are dispatched dynamically by name against the
capability snapshot taken at discovery, and the delay/exec_time/callback
modifiers are chainable and consumed by exactly the next invocation.
"""
from __future__ import annotations

from flexctl.agent import AGENT_OPERATIONS
from flexctl.entities import Subscription, _event_name
from flexctl.errors import EntityUnknown, InvalidSchedule, NodeUnknown, UnsupportedOperation
from flexctl.rpc import CallingContext


class _OperationChain:
    """Accumulates dotted operation names, e.g. proxy.radio.set_channel(11)."""

    __slots__ = ("_proxy", "_path")

    def __init__(self, proxy, path: str):
        object.__setattr__(self, "_proxy", proxy)
        object.__setattr__(self, "_path", path)

    def __getattr__(self, name: str):
        return _OperationChain(self._proxy, self._path + "." + name)

    def __call__(self, *args):
        return self._proxy.call_operation(self._path, *args)


class _ProxyBase:
    def __init__(self, runtime, node_uuid: str, local: bool, owner=None):
        self._runtime = runtime
        self._node_uuid = node_uuid
        self._local = local
        self._owner = owner  # entity that obtained this proxy, if any

    @property
    def local(self) -> bool:
        return self._local

    @property
    def node_uuid(self) -> str:
        return self._node_uuid

    def _check_node(self) -> None:
        if not self._runtime.has_node(self._node_uuid):
            raise NodeUnknown(f"node {self._node_uuid} is gone (NodeLostEvent seen)")

    def _owner_uuid(self):
        return self._owner.uuid if self._owner is not None else None

    def _owner_entity(self):
        if self._owner is None:
            raise EntityUnknown("this proxy has no owning entity; subscriptions need one")
        return self._owner


class _CallableProxy(_ProxyBase):
    """Shared machinery for entity proxies: dynamic dispatch plus modifiers."""

    kind = "entity"

    def __init__(self, runtime, node_uuid: str, descriptor: dict, local: bool, owner=None):
        super().__init__(runtime, node_uuid, local, owner=owner)
        self._descriptor = descriptor
        self._capabilities = frozenset(descriptor.get("operations") or ())
        self._mods: dict = {}

    # -- descriptor snapshot -------------------------------------------------

    @property
    def uuid(self) -> str:
        return self._descriptor["uuid"]

    @property
    def name(self) -> str:
        return self._descriptor.get("name", "")

    @property
    def device_name(self):
        return self._descriptor.get("device_name")

    @property
    def capabilities(self) -> frozenset:
        return self._capabilities

    # -- chainable call modifiers ----------------------------------------------

    @property
    def pending_modifiers(self) -> dict:
        return dict(self._mods)

    def delay(self, relative_ms: int):
        if "exec_at" in self._mods:
            raise InvalidSchedule("delay and exec_time are mutually exclusive")
        if relative_ms < 0:
            raise InvalidSchedule("delay must be non-negative")
        self._mods["delay_ms"] = int(relative_ms)
        return self

    def exec_time(self, absolute_unix_ms: int):
        if "delay_ms" in self._mods:
            raise InvalidSchedule("delay and exec_time are mutually exclusive")
        if absolute_unix_ms <= self._runtime.now_ms():
            raise InvalidSchedule("exec_time must lie strictly in the future")
        self._mods["exec_at"] = int(absolute_unix_ms)
        return self

    def callback(self, cb=None):
        # callback(None) still forces a non-blocking call
        self._mods["callback"] = cb
        return self

    # -- dynamic dispatch ----------------------------------------------------------

    def __getattr__(self, name: str):
        if name.startswith("_"):
            raise AttributeError(name)
        if name in self._capabilities:
            return lambda *args: self.call_operation(name, *args)
        prefix = name + "."
        if any(cap.startswith(prefix) for cap in self._capabilities):
            return _OperationChain(self, name)
        raise UnsupportedOperation(f"{self.name} does not expose operation {name!r}")

    def call_operation(self, operation: str, *args):
        mods, self._mods = self._mods, {}
        self._check_node()
        if operation not in self._capabilities:
            raise UnsupportedOperation(f"{self.name} does not expose operation {operation!r}")
        cb = mods.get("callback")
        blocking = not mods
        ctx = CallingContext(
            operation=operation,
            target_node=self._node_uuid,
            target_entity=self.uuid,
            blocking=blocking,
            callback_registered=callable(cb),
            delay_ms=mods.get("delay_ms"),
            exec_at=mods.get("exec_at"),
            args=list(args),
        )
        return self._runtime.invoke(ctx, caller_entity=self._owner_uuid(), callback=cb if callable(cb) else None)

    # -- events -------------------------------------------------------------------------

    def send_event(self, event_type, data=None) -> bool:
        """Unicast an event to this entity."""
        self._check_node()
        return self._runtime.route_event(
            self._owner_uuid() or self._runtime.uuid,
            _event_name(event_type),
            data,
            "unicast",
            target_entity=self.uuid,
        )

    def subscribe_for_events(self, event_type=None, callback=None) -> bool:
        """Receive events generated by this entity (all types when none given)."""
        if callback is None:
            return False
        self._check_node()
        owner = self._owner_entity()
        owner._add_subscription(
            Subscription(
                _event_name(event_type),
                callback,
                "global",
                src_node=self._node_uuid,
                src_entity=self.uuid,
                proxy=True,
            )
        )
        return True

    def unsubscribe_from_events(self, event_type=None) -> bool:
        name = _event_name(event_type)
        owner = self._owner_entity()
        owner._remove_subscriptions(
            lambda s: s.proxy
            and s.src_entity == self.uuid
            and (name is None or s.event_type == name)
        )
        return True


class DeviceProxy(_CallableProxy):
    kind = "device"


class ProtocolProxy(_CallableProxy):
    kind = "protocol"


class ControlApplicationProxy(_CallableProxy):
    kind = "application"

    def _agent_call(self, operation: str, *args):
        self._check_node()
        ctx = CallingContext(
            operation=operation,
            target_node=self._node_uuid,
            target_entity=self._node_uuid,
            args=list(args),
        )
        return self._runtime.invoke(ctx, caller_entity=self._owner_uuid())

    def is_running(self) -> bool:
        return bool(self._agent_call("is_control_application_running", self.uuid))

    def start(self) -> bool:
        return bool(self._agent_call("start_control_application", self.uuid))

    def stop(self) -> bool:
        return bool(self._agent_call("stop_control_application", self.uuid))


_PROXY_KINDS = {
    "device": DeviceProxy,
    "protocol": ProtocolProxy,
    "application": ControlApplicationProxy,
}


class NodeProxy(_ProxyBase):
    """Stand-in for a whole node; hands out proxies for its hosted entities."""

    kind = "node"

    def __init__(self, runtime, descriptor: dict, owner=None):
        super().__init__(runtime, descriptor["uuid"], bool(descriptor.get("local")), owner=owner)
        self._descriptor = descriptor

    @property
    def uuid(self) -> str:
        return self._descriptor["uuid"]

    @property
    def name(self) -> str:
        return self._descriptor.get("name", "")

    @property
    def info(self) -> str:
        return self._descriptor.get("info", "")

    @property
    def capabilities(self) -> frozenset:
        return frozenset(AGENT_OPERATIONS)

    # -- hosted-entity proxies ------------------------------------------------

    def _entity_proxies(self, kind: str) -> list:
        cls = _PROXY_KINDS[kind]
        return [
            cls(self._runtime, self.uuid, ent, self._local, owner=self._owner)
            for ent in self._descriptor.get("entities", ())
            if ent.get("kind") == kind
        ]

    def _entity_proxy(self, kind: str, key) -> object:
        proxies = self._entity_proxies(kind)
        if isinstance(key, int):
            if 0 <= key < len(proxies):
                return proxies[key]
            raise EntityUnknown(f"node {self.name} has no {kind} at index {key}")
        for proxy in proxies:
            if proxy.uuid == key:
                return proxy
        raise EntityUnknown(f"node {self.name} has no {kind} {key!r}")

    def get_devices(self) -> list:
        return self._entity_proxies("device")

    def get_device(self, key):
        return self._entity_proxy("device", key)

    def get_protocols(self) -> list:
        return self._entity_proxies("protocol")

    def get_protocol(self, key):
        return self._entity_proxy("protocol", key)

    def get_control_applications(self) -> list:
        return self._entity_proxies("application")

    def get_control_application(self, key):
        return self._entity_proxy("application", key)

    # -- node-wide events ----------------------------------------------------------

    def send_event(self, event_type, data=None) -> bool:
        """Node-broadcast an event to this node."""
        self._check_node()
        return self._runtime.route_event(
            self._owner_uuid() or self._runtime.uuid,
            _event_name(event_type),
            data,
            "node-broadcast",
            target_node=self.uuid,
        )

    def subscribe_for_events(self, event_type=None, callback=None) -> bool:
        if callback is None:
            return False
        self._check_node()
        owner = self._owner_entity()
        owner._add_subscription(
            Subscription(
                _event_name(event_type), callback, "global", src_node=self.uuid, proxy=True
            )
        )
        return True

    def unsubscribe_from_events(self, event_type=None) -> bool:
        name = _event_name(event_type)
        owner = self._owner_entity()
        owner._remove_subscriptions(
            lambda s: s.proxy
            and s.src_node == self.uuid
            and s.src_entity is None
            and (name is None or s.event_type == name)
        )
        return True

    # -- time introspection (agent stubs) ----------------------------------------------

    def _agent_call(self, operation: str, *args):
        self._check_node()
        ctx = CallingContext(
            operation=operation,
            target_node=self.uuid,
            target_entity=self.uuid,
            args=list(args),
        )
        return self._runtime.invoke(ctx, caller_entity=self._owner_uuid())

    def get_time(self) -> int:
        return self._agent_call("get_time")

    def is_synchronizing(self) -> bool:
        return bool(self._agent_call("is_synchronizing"))

    def get_time_synchronization_source(self) -> str:
        return self._agent_call("get_time_synchronization_source")

    def get_time_synchronization_accuracy(self) -> float:
        return self._agent_call("get_time_synchronization_accuracy")

    def time_info(self) -> dict:
        return {
            "time": self.get_time(),
            "synchronizing": self.is_synchronizing(),
            "source": self.get_time_synchronization_source(),
            "accuracy_ms": self.get_time_synchronization_accuracy(),
        }
