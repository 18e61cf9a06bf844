"""Base behaviors for hosted entities: control applications and device/protocol modules.

Every entity runs on its own serial execution context (one worker thread with
a bounded inbox), so entity authors write single-threaded code. Modules stay
usable standalone: bound operations are ordinary methods that work without
any agent attached.
"""
from __future__ import annotations

import collections
import logging
import threading
import traceback
import uuid as uuidlib
from dataclasses import dataclass

from flexctl.errors import DuplicateBinding, NotStarted

log = logging.getLogger(__name__)

_SUBS_ATTR = "_flexctl_subscriptions"
_OP_ATTR = "_flexctl_operation"

NODE_BROADCAST = "node-broadcast"
GLOBAL_BROADCAST = "global-broadcast"

_SCOPES = {NODE_BROADCAST: "node", GLOBAL_BROADCAST: "global"}


def _event_name(event_type) -> str | None:
    if event_type is None:
        return None
    if isinstance(event_type, str):
        return event_type
    return getattr(event_type, "__name__", str(event_type))


def on_event(event_type=None, mode: str = GLOBAL_BROADCAST):
    """Declare a permanent subscription on an entity method.

    The handler is called as handler(payload, src_node, src_entity). With no
    event type the handler receives events of every type.
    """

    def deco(fn):
        fn.__dict__.setdefault(_SUBS_ATTR, []).append((_event_name(event_type), mode))
        return fn

    return deco


def bind_function(exposed_name):
    """Expose a method as a named RPC operation, optionally under an alias."""

    def deco(fn):
        fn.__dict__[_OP_ATTR] = str(exposed_name)
        return fn

    return deco


@dataclass
class Subscription:
    event_type: str | None  # None = wildcard
    callback: object
    scope: str  # "node" (local-origin only) or "global"
    src_node: str | None = None
    src_entity: str | None = None
    proxy: bool = False

    def matches(self, event_type: str, src_node: str, src_entity: str, local_node: str) -> bool:
        if self.event_type is not None and self.event_type != event_type:
            return False
        if self.src_node is not None and self.src_node != src_node:
            return False
        if self.src_entity is not None and self.src_entity != src_entity:
            return False
        if self.scope == "node" and src_node != local_node:
            return False
        return True


class SerialInbox:
    """Bounded FIFO feeding an entity's worker; overflow drops the oldest item."""

    def __init__(self, maxsize: int = 1024):
        self._items = collections.deque()
        self._cv = threading.Condition()
        self._maxsize = maxsize
        self.dropped = 0

    def put(self, item) -> None:
        with self._cv:
            if len(self._items) >= self._maxsize:
                self._items.popleft()
                self.dropped += 1
                if self.dropped % 100 == 1:
                    log.warning("inbox overflow, %d items dropped so far", self.dropped)
            self._items.append(item)
            self._cv.notify()

    def get(self):
        with self._cv:
            while not self._items:
                self._cv.wait()
            return self._items.popleft()

    def __len__(self) -> int:
        with self._cv:
            return len(self._items)


_STOP = object()


class Entity:
    """Common machinery for applications and device/protocol modules."""

    kind = "application"

    def __init__(self, name: str | None = None, inbox_size: int = 1024):
        self.uuid = str(uuidlib.uuid4())
        self.name = name or type(self).__name__
        self.device_name: str | None = None
        self._operations: dict = {}
        self._subscriptions: list[Subscription] = []
        self._sub_lock = threading.Lock()
        self._runtime = None
        self._inbox = SerialInbox(inbox_size)
        self._worker: threading.Thread | None = None
        self._started = False
        self._failed = False
        self._collect_decorated()

    # -- registration ------------------------------------------------------

    def _collect_decorated(self) -> None:
        seen = set()
        for klass in type(self).__mro__:
            for attr, fn in vars(klass).items():
                if attr in seen or not callable(fn):
                    continue
                seen.add(attr)
                fdict = getattr(fn, "__dict__", {})
                if _OP_ATTR in fdict:
                    self.bind_operation(fdict[_OP_ATTR], getattr(self, attr))
                for event_type, mode in fdict.get(_SUBS_ATTR, ()):
                    self._add_subscription(
                        Subscription(event_type, getattr(self, attr), _SCOPES.get(mode, "global"))
                    )

    def bind_operation(self, exposed_name: str, implementation) -> None:
        if exposed_name in self._operations:
            raise DuplicateBinding(f"operation {exposed_name!r} already bound on {self.name}")
        self._operations[exposed_name] = implementation

    @property
    def operations(self) -> list:
        return sorted(self._operations)

    def get_operation(self, name: str):
        return self._operations.get(name)

    def descriptor(self) -> dict:
        return {
            "uuid": self.uuid,
            "kind": self.kind,
            "name": self.name,
            "device_name": self.device_name,
            "operations": self.operations,
        }

    # -- subscriptions -----------------------------------------------------

    def _add_subscription(self, sub: Subscription) -> None:
        with self._sub_lock:
            self._subscriptions.append(sub)
        if self._runtime is not None and self._started:
            self._runtime.subscription_added(self, sub)

    def subscribe_for_events(self, event_type=None, callback=None, mode: str = GLOBAL_BROADCAST) -> bool:
        if callback is None or mode not in _SCOPES:
            return False
        self._add_subscription(Subscription(_event_name(event_type), callback, _SCOPES[mode]))
        return True

    def unsubscribe_from_events(self, event_type=None) -> bool:
        name = _event_name(event_type)
        with self._sub_lock:
            keep, removed = [], []
            for sub in self._subscriptions:
                if sub.proxy or (name is not None and sub.event_type != name):
                    keep.append(sub)
                else:
                    removed.append(sub)
            self._subscriptions = keep
        if self._runtime is not None:
            for sub in removed:
                self._runtime.subscription_removed(self, sub)
        return True

    def subscriptions(self) -> list:
        with self._sub_lock:
            return list(self._subscriptions)

    def _remove_subscriptions(self, predicate) -> None:
        with self._sub_lock:
            removed = [s for s in self._subscriptions if predicate(s)]
            self._subscriptions = [s for s in self._subscriptions if not predicate(s)]
        if self._runtime is not None:
            for sub in removed:
                self._runtime.subscription_removed(self, sub)

    # -- events ------------------------------------------------------------

    def send_event(self, event_type, data=None, mode: str = GLOBAL_BROADCAST) -> bool:
        """Broadcast an event; unicast is available only through proxies."""
        if not self._started or self._runtime is None:
            raise NotStarted(f"entity {self.name} is not started")
        if mode not in _SCOPES:
            return False
        target_node = self._runtime.uuid if mode == NODE_BROADCAST else None
        return self._runtime.route_event(
            self.uuid, _event_name(event_type), data, mode, target_node=target_node
        )

    # -- lifecycle ---------------------------------------------------------

    def on_start(self) -> None:
        pass

    def on_stop(self) -> None:
        pass

    @property
    def is_started(self) -> bool:
        return self._started

    def start(self, runtime=None) -> bool:
        if self._started:
            return True
        if runtime is not None:
            self._runtime = runtime
        self._failed = False
        self._started = True
        self._worker = threading.Thread(target=self._work_loop, name=f"entity-{self.name}", daemon=True)
        self._worker.start()
        self._inbox.put(("hook", self.on_start))
        if self._runtime is not None:
            self._runtime.entity_started(self)
        return True

    def stop(self) -> bool:
        if not self._started:
            return True
        self._started = False  # no further deliveries are accepted
        if self._runtime is not None:
            self._runtime.entity_stopped(self)
        self._inbox.put(("hook", self.on_stop))
        self._inbox.put(_STOP)
        worker = self._worker
        if worker is not None and worker is not threading.current_thread():
            worker.join(timeout=10)
        self._worker = None
        return True

    # -- delivery (called by the runtime) ------------------------------------

    def deliver(self, callback, payload, src_node: str, src_entity: str) -> bool:
        if not self._started:
            return False
        self._inbox.put(("event", callback, payload, src_node, src_entity))
        return True

    def post(self, fn) -> bool:
        """Run fn on this entity's serial context."""
        if not self._started:
            return False
        self._inbox.put(("call", fn))
        return True

    def _work_loop(self) -> None:
        while True:
            item = self._inbox.get()
            if item is _STOP:
                return
            kind = item[0]
            try:
                if kind == "event":
                    _, callback, payload, src_node, src_entity = item
                    callback(payload, src_node, src_entity)
                elif kind == "call":
                    item[1]()
                elif kind == "hook":
                    item[1]()
            except Exception as exc:
                self._handle_failure(kind, exc)

    def _handle_failure(self, kind: str, exc: Exception) -> None:
        diagnostic = traceback.format_exc()
        log.error("entity %s %s handler failed: %s", self.name, kind, exc)
        log.debug("%s", diagnostic)
        if kind == "hook":
            self._failed = True
        if self._runtime is not None and self._started:
            try:
                self._runtime.route_event(
                    self.uuid,
                    "ErrorEvent",
                    {"entity": self.uuid, "error": type(exc).__name__, "message": str(exc)},
                    NODE_BROADCAST,
                    target_node=self._runtime.uuid,
                )
            except Exception:
                log.debug("could not report ErrorEvent", exc_info=True)


class ControlApplication(Entity):
    """User logic implementing (part of) a network controller."""

    kind = "application"

    def get_local_node(self):
        if self._runtime is None:
            raise NotStarted(f"application {self.name} is not attached to an agent")
        return self._runtime.local_node_proxy(owner=self)

    def get_node(self, node_uuid: str):
        if self._runtime is None:
            raise NotStarted(f"application {self.name} is not attached to an agent")
        return self._runtime.node_proxy(node_uuid, owner=self)

    def get_nodes(self) -> list:
        if self._runtime is None:
            raise NotStarted(f"application {self.name} is not attached to an agent")
        return [self._runtime.node_proxy(u, owner=self) for u in self._runtime.known_nodes()]


class DeviceModule(Entity):
    """Adapter exposing a device's native programming interface as operations."""

    kind = "device"

    def __init__(self, name: str | None = None, device: str | None = None, inbox_size: int = 1024):
        super().__init__(name=name, inbox_size=inbox_size)
        self.device_name = device


class ProtocolModule(Entity):
    """Adapter exposing a protocol's native programming interface as operations."""

    kind = "protocol"

    def __init__(self, name: str | None = None, device: str | None = None, inbox_size: int = 1024):
        super().__init__(name=name, inbox_size=inbox_size)
        self.device_name = device
