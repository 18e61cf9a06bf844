"""Per-node runtime.

The Agent hosts entities (applications, device modules, protocol modules),
connects them to the broker, runs discovery and heartbeat, keeps the node
registry, and routes events either fully in-process (local fast path) or via
the broker.
"""
from __future__ import annotations

import hashlib
import logging
import threading
import time
import traceback
import uuid as uuidlib

from flexctl import transport
from flexctl.entities import ControlApplication, DeviceModule, Entity, ProtocolModule, Subscription
from flexctl.errors import (
    EntityUnknown,
    FlexctlError,
    InvalidTarget,
    NodeUnknown,
    NotStarted,
    SerializationError,
)
from flexctl.rpc import COMMAND_EVENT, RESPONSE_EVENT, CallingContext, RpcEngine, error_response, ok_response
from flexctl.scheduler import Scheduler
from flexctl.wire import SerializerRegistry, decode_envelope, encode_envelope, make_envelope

log = logging.getLogger(__name__)

HELLO_TOPIC = "sys/hello"
NODEINFO_REQ_TOPIC = "sys/nodeinfo-req"
NODEINFO_RESP_TOPIC = "sys/nodeinfo-resp"

NEW_NODE_EVENT = "NewNodeEvent"
NODE_LOST_EVENT = "NodeLostEvent"

# Operations every agent answers on behalf of its node (NodeProxy capability set).
AGENT_OPERATIONS = (
    "get_time",
    "is_synchronizing",
    "get_time_synchronization_source",
    "get_time_synchronization_accuracy",
    "start_control_application",
    "stop_control_application",
    "is_control_application_running",
)


class BrokerLink:
    """Two TCP connections to the broker (publish + subscribe) with retry.

    Desired subscriptions are tracked here and replayed after every
    (re)connect, so agent code can subscribe while disconnected.
    """

    def __init__(self, pub_uri: str, sub_uri: str, on_message, on_connect=None):
        self.pub_uri = pub_uri
        self.sub_uri = sub_uri
        self._on_message = on_message
        self._on_connect = on_connect
        self._prefixes: set = set()
        self._lock = threading.Lock()
        self._pub: transport.MessageStream | None = None
        self._sub: transport.MessageStream | None = None
        self._running = False
        self._connected = threading.Event()
        self._thread: threading.Thread | None = None
        # totals from closed streams; live stream counters are added on read
        self._base = {"bytes_sent": 0, "bytes_received": 0, "messages_sent": 0, "messages_received": 0}

    def start(self) -> None:
        with self._lock:
            if self._running:
                return
            self._running = True
        self._thread = threading.Thread(target=self._connect_loop, name="broker-link", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._lock:
            self._running = False
            pub, sub = self._pub, self._sub
        for stream in (pub, sub):
            if stream is not None:
                stream.close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    @property
    def connected(self) -> bool:
        return self._connected.is_set()

    def wait_connected(self, timeout: float | None = None) -> bool:
        return self._connected.wait(timeout)

    def _connect_loop(self) -> None:
        backoff = 0.2
        while True:
            with self._lock:
                if not self._running:
                    return
            try:
                pub = transport.connect(*transport.parse_endpoint(self.pub_uri))
                sub = transport.connect(*transport.parse_endpoint(self.sub_uri))
            except OSError as exc:
                log.info("broker unreachable (%s), retrying in %.1fs", exc, backoff)
                time.sleep(backoff)
                backoff = min(backoff * 2, 2.0)
                continue
            backoff = 0.2
            with self._lock:
                self._pub, self._sub = pub, sub
                prefixes = sorted(self._prefixes)
            try:
                for prefix in prefixes:
                    sub.send(transport.SUB_TOPIC, b"{}", prefix.encode("utf-8"))
            except OSError:
                continue
            self._connected.set()
            log.info("connected to broker (pub=%s sub=%s)", self.pub_uri, self.sub_uri)
            if self._on_connect is not None:
                try:
                    self._on_connect()
                except Exception:
                    log.exception("on_connect hook failed")
            self._recv_loop(sub)
            self._connected.clear()
            with self._lock:
                for stream in (self._pub, self._sub):
                    if stream is not None:
                        for key in self._base:
                            self._base[key] += getattr(stream, key)
                        stream.close()
                self._pub = self._sub = None

    def _recv_loop(self, sub: transport.MessageStream) -> None:
        while True:
            msg = sub.recv()
            if msg is None:
                return
            try:
                self._on_message(*msg)
            except Exception:
                log.exception("message dispatch failed")

    def publish(self, topic: bytes, header: bytes, payload: bytes) -> bool:
        with self._lock:
            pub = self._pub
        if pub is None:
            return False
        try:
            pub.send(topic, header, payload)
            return True
        except OSError:
            return False

    def subscribe(self, prefix: str) -> None:
        with self._lock:
            if prefix in self._prefixes:
                return
            self._prefixes.add(prefix)
            sub = self._sub
        if sub is not None:
            try:
                sub.send(transport.SUB_TOPIC, b"{}", prefix.encode("utf-8"))
            except OSError:
                pass

    def unsubscribe(self, prefix: str) -> None:
        with self._lock:
            if prefix not in self._prefixes:
                return
            self._prefixes.discard(prefix)
            sub = self._sub
        if sub is not None:
            try:
                sub.send(transport.UNSUB_TOPIC, b"{}", prefix.encode("utf-8"))
            except OSError:
                pass

    def stats(self) -> dict:
        with self._lock:
            totals = dict(self._base)
            for stream in (self._pub, self._sub):
                if stream is not None:
                    for key in totals:
                        totals[key] += getattr(stream, key)
        return totals


class _NodeEntry:
    __slots__ = ("descriptor", "last_hello", "config_hash")

    def __init__(self, descriptor: dict, last_hello: int, config_hash: str):
        self.descriptor = descriptor
        self.last_hello = last_hello
        self.config_hash = config_hash


class Agent:
    """Hosts entities and connects them to the distributed control plane."""

    def __init__(
        self,
        name: str = "agent",
        info: str = "",
        uuid: str | None = None,
        pub_uri: str | None = None,
        sub_uri: str | None = None,
        hello_interval: float = 3.0,
        hello_timeout: float = 9.0,
        rpc_timeout: float = 60.0,
        time_source: str = "none",
        time_synchronizing: bool = False,
        time_accuracy_ms: float = 0.0,
        config_hash: str = "",
        clock=time.time,
        serializers: SerializerRegistry | None = None,
    ):
        self.uuid = uuid or str(uuidlib.uuid4())
        self.name = name
        self.info = info
        self.hello_interval = hello_interval
        self.hello_timeout = hello_timeout
        self.time_source = time_source
        self.time_synchronizing = time_synchronizing
        self.time_accuracy_ms = time_accuracy_ms
        self.config_hash = config_hash
        self.clock = clock
        self.serializers = serializers or SerializerRegistry()

        self.scheduler = Scheduler(clock=clock)
        self.rpc = RpcEngine(self, default_timeout=rpc_timeout)
        self._entities: dict[str, Entity] = {}
        self._entity_lock = threading.RLock()
        self._registry: dict[str, _NodeEntry] = {}
        self._registry_lock = threading.Lock()
        self._info_pending: dict[str, int] = {}
        self._evt_refcount: dict[str, int] = {}
        self._refcount_lock = threading.Lock()
        self._running = False
        self._stop_event = threading.Event()
        self._hello_thread: threading.Thread | None = None

        self.link: BrokerLink | None = None
        if pub_uri and sub_uri:
            self.link = BrokerLink(pub_uri, sub_uri, self._on_broker_message, self._on_broker_connect)
            self.link.subscribe("sys/")
            self.link.subscribe("node/" + self.uuid)
            self.link.subscribe("ent/" + self.uuid)

    # -- clock ---------------------------------------------------------------

    def now_ms(self) -> int:
        return int(self.clock() * 1000)

    # -- entity management ----------------------------------------------------

    def _add_entity(self, entity: Entity, kind: str) -> bool:
        if entity.kind != kind:
            return False
        with self._entity_lock:
            if entity.uuid in self._entities:
                return False
            entity._runtime = self
            self._entities[entity.uuid] = entity
        if self._running:
            entity.start(self)
        return True

    def add_control_application(self, app) -> bool:
        return self._add_entity(app, "application")

    def add_device_module(self, mod) -> bool:
        if mod.kind == "device" and not mod.device_name:
            mod.device_name = mod.name
        return self._add_entity(mod, "device")

    def add_protocol_module(self, mod) -> bool:
        return self._add_entity(mod, "protocol")

    def _of_kind(self, kind: str) -> list:
        with self._entity_lock:
            return [e for e in self._entities.values() if e.kind == kind]

    def get_control_applications(self) -> list:
        return self._of_kind("application")

    def get_device_modules(self) -> list:
        return self._of_kind("device")

    def get_protocol_modules(self) -> list:
        return self._of_kind("protocol")

    def get_entity(self, entity_uuid: str):
        with self._entity_lock:
            return self._entities.get(entity_uuid)

    def _get_of_kind(self, entity_uuid: str, kind: str):
        entity = self.get_entity(entity_uuid)
        return entity if entity is not None and entity.kind == kind else None

    def get_control_application(self, app_uuid: str):
        return self._get_of_kind(app_uuid, "application")

    def get_device_module(self, mod_uuid: str):
        return self._get_of_kind(mod_uuid, "device")

    def get_protocol_module(self, mod_uuid: str):
        return self._get_of_kind(mod_uuid, "protocol")

    def start_control_application(self, app_uuid: str) -> bool:
        app = self.get_control_application(app_uuid)
        if app is None:
            return False
        return app.start(self)

    def stop_control_application(self, app_uuid: str) -> bool:
        app = self.get_control_application(app_uuid)
        if app is None:
            return False
        return app.stop()

    def remove_control_application(self, app_uuid: str) -> bool:
        app = self.get_control_application(app_uuid)
        if app is None:
            return False
        app.stop()
        with self._entity_lock:
            self._entities.pop(app_uuid, None)
        return True

    def _is_app_running(self, app_uuid: str) -> bool:
        app = self.get_control_application(app_uuid)
        return app is not None and app.is_started

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        if self._running:
            return
        self._running = True
        self._stop_event.clear()
        self.scheduler.start()
        if self.link is not None:
            self.link.start()
        # modules first so applications can reach them from on_start
        with self._entity_lock:
            entities = list(self._entities.values())
        for entity in sorted(entities, key=lambda e: 0 if e.kind in ("device", "protocol") else 1):
            entity.start(self)
        if self.link is not None:
            self._hello_thread = threading.Thread(target=self._hello_loop, name="agent-hello", daemon=True)
            self._hello_thread.start()

    def stop(self) -> None:
        if not self._running:
            return
        self._running = False
        self._stop_event.set()
        with self._entity_lock:
            entities = list(self._entities.values())
        for entity in sorted(entities, key=lambda e: 0 if e.kind == "application" else 1):
            entity.stop()
        if self._hello_thread is not None:
            self._hello_thread.join(timeout=5)
            self._hello_thread = None
        if self.link is not None:
            self.link.stop()
        self.scheduler.stop()

    def run(self) -> None:
        self.start()
        self._stop_event.wait()

    @property
    def is_running(self) -> bool:
        return self._running

    def entity_started(self, entity: Entity) -> None:
        if self.link is not None:
            self.link.subscribe("ent/" + entity.uuid)
        for sub in entity.subscriptions():
            self.subscription_added(entity, sub)

    def entity_stopped(self, entity: Entity) -> None:
        if self.link is not None:
            self.link.unsubscribe("ent/" + entity.uuid)
        for sub in entity.subscriptions():
            self.subscription_removed(entity, sub)

    # -- broker subscription refcounting ---------------------------------------

    def _broker_prefix(self, sub: Subscription) -> str | None:
        if sub.scope != "global":
            return None
        if sub.src_node == self.uuid:
            return None
        return "evt/" if sub.event_type is None else "evt/" + sub.event_type

    def subscription_added(self, entity: Entity, sub: Subscription) -> None:
        prefix = self._broker_prefix(sub)
        if prefix is None or self.link is None:
            return
        with self._refcount_lock:
            self._evt_refcount[prefix] = self._evt_refcount.get(prefix, 0) + 1
            fresh = self._evt_refcount[prefix] == 1
        if fresh:
            self.link.subscribe(prefix)

    def subscription_removed(self, entity: Entity, sub: Subscription) -> None:
        prefix = self._broker_prefix(sub)
        if prefix is None or self.link is None:
            return
        with self._refcount_lock:
            count = self._evt_refcount.get(prefix, 0) - 1
            if count <= 0:
                self._evt_refcount.pop(prefix, None)
            else:
                self._evt_refcount[prefix] = count
        if count <= 0:
            self.link.unsubscribe(prefix)

    # -- node registry ----------------------------------------------------------

    def descriptor(self, local: bool = True) -> dict:
        with self._entity_lock:
            entities = [e.descriptor() for e in self._entities.values()]
        return {
            "uuid": self.uuid,
            "name": self.name,
            "info": self.info,
            "entities": entities,
            "local": local,
        }

    def has_node(self, node_uuid: str) -> bool:
        if node_uuid == self.uuid:
            return True
        with self._registry_lock:
            return node_uuid in self._registry

    def known_nodes(self) -> list:
        with self._registry_lock:
            return list(self._registry)

    def node_descriptor(self, node_uuid: str) -> dict:
        if node_uuid == self.uuid:
            return self.descriptor(local=True)
        with self._registry_lock:
            entry = self._registry.get(node_uuid)
        if entry is None:
            raise NodeUnknown(f"node {node_uuid} is not in the registry")
        return entry.descriptor

    def node_proxy(self, node_uuid: str, owner=None):
        from flexctl.proxies import NodeProxy

        descriptor = self.node_descriptor(node_uuid)
        return NodeProxy(self, descriptor, owner=owner)

    def local_node_proxy(self, owner=None):
        return self.node_proxy(self.uuid, owner=owner)

    def _find_entity_node(self, entity_uuid: str) -> str | None:
        with self._entity_lock:
            if entity_uuid in self._entities:
                return self.uuid
        with self._registry_lock:
            for node_uuid, entry in self._registry.items():
                for ent in entry.descriptor.get("entities", ()):
                    if ent.get("uuid") == entity_uuid:
                        return node_uuid
        return None

    # -- event routing ------------------------------------------------------------

    def route_event(
        self,
        src_entity: str,
        event_type: str,
        data,
        mode: str,
        target_node: str | None = None,
        target_entity: str | None = None,
    ) -> bool:
        if mode == "unicast":
            if not target_entity:
                raise InvalidTarget("unicast requires a target entity")
            if self.get_entity(target_entity) is not None:
                self._deliver_local(event_type, data, self.uuid, src_entity, "unicast", target_entity)
                return True
            return self._publish_event("ent/" + target_entity, event_type, data, src_entity)
        if mode == "node-broadcast":
            if not target_node:
                raise InvalidTarget("node-broadcast requires a target node")
            if target_node == self.uuid:
                self._deliver_local(event_type, data, self.uuid, src_entity, "node")
                return True
            return self._publish_event("node/" + target_node, event_type, data, src_entity)
        if mode == "global-broadcast":
            self._deliver_local(event_type, data, self.uuid, src_entity, "global")
            if self.link is not None:
                self._publish_event("evt/" + event_type, event_type, data, src_entity)
            return True
        raise InvalidTarget(f"unknown event mode {mode!r}")

    def _publish_event(self, topic: str, event_type: str, data, src_entity: str) -> bool:
        if self.link is None:
            return False
        env = make_envelope(
            topic,
            event_type,
            data,
            src_node=self.uuid,
            src_entity=src_entity or self.uuid,
            registry=self.serializers,
            sent_at=self.now_ms(),
        )
        return self.link.publish(*encode_envelope(env, self.serializers))

    def _deliver_local(
        self,
        event_type: str,
        payload,
        src_node: str,
        src_entity: str,
        audience: str,
        target_entity: str | None = None,
        raw: bytes | None = None,
        format_id: str | None = None,
    ) -> None:
        with self._entity_lock:
            entities = list(self._entities.values())
        if audience == "unicast":
            entities = [e for e in entities if e.uuid == target_entity]
        for entity in entities:
            if entity.uuid == src_entity or not entity.is_started:
                continue
            for sub in entity.subscriptions():
                if not sub.matches(event_type, src_node, src_entity, self.uuid):
                    continue
                if raw is None:
                    entity.deliver(sub.callback, payload, src_node, src_entity)
                else:
                    entity.post(self._lazy_delivery(sub.callback, raw, format_id, src_node, src_entity))

    def _lazy_delivery(self, callback, raw: bytes, format_id: str, src_node: str, src_entity: str):
        # payload bytes are decoded on the consuming entity's context, so
        # unknown formats transit intermediaries untouched
        def run():
            if self.serializers.has(format_id):
                payload = self.serializers.deserialize(format_id, raw)
            else:
                payload = raw
            callback(payload, src_node, src_entity)

        return run

    # -- rpc ------------------------------------------------------------------------

    def invoke(self, ctx: CallingContext, caller_entity: str | None = None, callback=None, timeout: float | None = None):
        return self.rpc.invoke(ctx, caller_entity=caller_entity, callback=callback, timeout=timeout)

    def send_command(self, ctx: CallingContext, src_entity: str | None = None) -> None:
        src_entity = src_entity or self.uuid
        if ctx.target_node == self.uuid:
            self.handle_command(ctx.to_payload(), self.uuid, src_entity)
            return
        topic = "node/" + ctx.target_node if ctx.target_entity == ctx.target_node else "ent/" + ctx.target_entity
        if not self._publish_event(topic, COMMAND_EVENT, ctx.to_payload(), src_entity):
            raise NodeUnknown(f"cannot reach node {ctx.target_node}: broker link down")

    def handle_command(self, doc: dict, src_node: str, src_entity: str) -> None:
        try:
            ctx = CallingContext.from_payload(doc)
        except (KeyError, TypeError) as exc:
            log.warning("malformed command dropped: %s", exc)
            return
        if ctx.delay_ms is not None or ctx.exec_at is not None:
            due = self.now_ms() + ctx.delay_ms if ctx.delay_ms is not None else ctx.exec_at
            self.scheduler.call_at(due, lambda: self._execute_command(ctx, src_node, src_entity))
        else:
            self._execute_command(ctx, src_node, src_entity)

    def _execute_command(self, ctx: CallingContext, src_node: str, src_entity: str) -> None:
        respond = lambda payload: self._respond(src_node, src_entity, payload)  # noqa: E731
        if ctx.target_entity == self.uuid:
            self._run_operation(self._agent_operation(ctx.operation), ctx, respond)
            return
        entity = self.get_entity(ctx.target_entity)
        if entity is None:
            respond(error_response(ctx.correlation_id, "EntityUnknown", f"no entity {ctx.target_entity}"))
            return
        queued = entity.post(lambda: self._run_operation(entity.get_operation(ctx.operation), ctx, respond))
        if not queued:
            respond(error_response(ctx.correlation_id, "NotStarted", f"entity {entity.name} is not started"))

    def _agent_operation(self, name: str):
        table = {
            "get_time": self.now_ms,
            "is_synchronizing": lambda: self.time_synchronizing,
            "get_time_synchronization_source": lambda: self.time_source,
            "get_time_synchronization_accuracy": lambda: self.time_accuracy_ms,
            "start_control_application": self.start_control_application,
            "stop_control_application": self.stop_control_application,
            "is_control_application_running": self._is_app_running,
        }
        return table.get(name)

    def _run_operation(self, fn, ctx: CallingContext, respond) -> None:
        if fn is None:
            respond(error_response(ctx.correlation_id, "UnsupportedOperation", f"no operation {ctx.operation!r}"))
            return
        try:
            value = fn(*ctx.args)
        except Exception as exc:
            respond(error_response(ctx.correlation_id, type(exc).__name__, str(exc), traceback.format_exc()))
            return
        respond(ok_response(ctx.correlation_id, value))

    def _respond(self, src_node: str, src_entity: str, payload: dict) -> None:
        if src_node == self.uuid:
            self.rpc.resolve(payload)
            return
        try:
            self._publish_event("ent/" + src_entity, RESPONSE_EVENT, payload, self.uuid)
        except SerializationError as exc:
            fallback = error_response(payload.get("correlation_id", ""), "SerializationError", str(exc))
            self._publish_event("ent/" + src_entity, RESPONSE_EVENT, fallback, self.uuid)

    def schedule_entity_call(self, entity: Entity, delay_ms: int, fn) -> None:
        self.scheduler.call_later(delay_ms, lambda: entity.post(fn))

    # -- discovery & heartbeat ---------------------------------------------------------

    def _on_broker_connect(self) -> None:
        self._send_hello()

    def _send_hello(self) -> None:
        self._publish_event(HELLO_TOPIC, "Hello", {"uuid": self.uuid, "config_hash": self.config_hash}, self.uuid)

    def _hello_loop(self) -> None:
        while not self._stop_event.wait(self.hello_interval):
            self._send_hello()
            self._expire_nodes()

    def _expire_nodes(self) -> None:
        cutoff = self.now_ms() - int(self.hello_timeout * 1000)
        lost = []
        with self._registry_lock:
            for node_uuid, entry in list(self._registry.items()):
                if entry.last_hello < cutoff:
                    lost.append(self._registry.pop(node_uuid))
        for entry in lost:
            log.info("node %s lost", entry.descriptor.get("uuid"))
            self._deliver_local(NODE_LOST_EVENT, entry.descriptor, self.uuid, self.uuid, "node")

    def _on_hello(self, doc: dict) -> None:
        node_uuid = doc.get("uuid")
        config_hash = doc.get("config_hash", "")
        if not isinstance(node_uuid, str) or not node_uuid or node_uuid == self.uuid:
            return
        now = self.now_ms()
        with self._registry_lock:
            entry = self._registry.get(node_uuid)
            if entry is not None:
                entry.last_hello = now
                if entry.config_hash == config_hash:
                    return
        # unknown node (or changed configuration): request full information,
        # but at most once per hello interval
        with self._registry_lock:
            asked = self._info_pending.get(node_uuid, 0)
            if now - asked < int(self.hello_interval * 1000):
                return
            self._info_pending[node_uuid] = now
        self._publish_event(
            NODEINFO_REQ_TOPIC, "NodeInformationRequest", {"target": node_uuid, "requester": self.uuid}, self.uuid
        )

    def _on_nodeinfo_req(self, doc: dict) -> None:
        if doc.get("target") != self.uuid:
            return
        descriptor = self.descriptor(local=False)
        descriptor["target"] = doc.get("requester")
        descriptor["config_hash"] = self.config_hash
        self._publish_event(NODEINFO_RESP_TOPIC, "NodeInformationResponse", descriptor, self.uuid)

    def _on_nodeinfo_resp(self, doc: dict) -> None:
        if doc.get("target") != self.uuid:
            return
        node_uuid = doc.get("uuid")
        if not isinstance(node_uuid, str) or not node_uuid or node_uuid == self.uuid:
            return
        descriptor = {
            "uuid": node_uuid,
            "name": doc.get("name", ""),
            "info": doc.get("info", ""),
            "entities": doc.get("entities", []),
            "local": False,
        }
        now = self.now_ms()
        with self._registry_lock:
            fresh = node_uuid not in self._registry
            self._registry[node_uuid] = _NodeEntry(descriptor, now, doc.get("config_hash", ""))
            self._info_pending.pop(node_uuid, None)
        if fresh:
            log.info("discovered node %s (%s)", descriptor["name"], node_uuid)
            self._deliver_local(NEW_NODE_EVENT, descriptor, self.uuid, self.uuid, "node")

    # -- broker dispatch -------------------------------------------------------------------

    def _decode_system_payload(self, env) -> dict | None:
        try:
            doc = self.serializers.deserialize(env.header.format_id, env.payload)
        except SerializationError as exc:
            log.warning("malformed system payload on %s dropped: %s", env.topic, exc)
            return None
        if not isinstance(doc, dict):
            log.warning("system payload on %s is not an object, dropped", env.topic)
            return None
        return doc

    def _on_broker_message(self, topic: bytes, header: bytes, payload: bytes) -> None:
        try:
            env = decode_envelope((topic, header, payload))
        except FlexctlError as exc:
            log.warning("undecodable envelope dropped: %s", exc)
            return
        head = env.header
        if head.src_node == self.uuid:
            return  # our own broadcast echoed back; already delivered locally
        if env.topic == HELLO_TOPIC:
            doc = self._decode_system_payload(env)
            if doc is not None:
                self._on_hello(doc)
            return
        if env.topic == NODEINFO_REQ_TOPIC:
            doc = self._decode_system_payload(env)
            if doc is not None:
                self._on_nodeinfo_req(doc)
            return
        if env.topic == NODEINFO_RESP_TOPIC:
            doc = self._decode_system_payload(env)
            if doc is not None:
                self._on_nodeinfo_resp(doc)
            return
        if head.event_type == COMMAND_EVENT:
            doc = self._decode_system_payload(env)
            if doc is not None:
                self.handle_command(doc, head.src_node, head.src_entity)
            return
        if head.event_type == RESPONSE_EVENT:
            doc = self._decode_system_payload(env)
            if doc is not None:
                self.rpc.resolve(doc)
            return
        if env.topic.startswith("node/"):
            if env.topic[5:] == self.uuid:
                self._deliver_local(
                    head.event_type, None, head.src_node, head.src_entity, "node",
                    raw=env.payload, format_id=head.format_id,
                )
            return
        if env.topic.startswith("ent/"):
            self._deliver_local(
                head.event_type, None, head.src_node, head.src_entity, "unicast",
                target_entity=env.topic[4:], raw=env.payload, format_id=head.format_id,
            )
            return
        if env.topic.startswith("evt/"):
            self._deliver_local(
                head.event_type, None, head.src_node, head.src_entity, "global",
                raw=env.payload, format_id=head.format_id,
            )

    # -- introspection ---------------------------------------------------------------------

    def transport_stats(self) -> dict:
        if self.link is None:
            return {"bytes_sent": 0, "bytes_received": 0, "messages_sent": 0, "messages_received": 0}
        return self.link.stats()


def config_fingerprint(doc) -> str:
    """Short stable hash of a configuration document (goes into hello messages)."""
    from flexctl.wire import canonical_json

    return hashlib.sha1(canonical_json(doc)).hexdigest()[:12]
