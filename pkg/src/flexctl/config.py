"""YAML node configuration.

Top-level keys: agent (name, info, pub, sub), applications and modules (both
mappings of entry name -> {class_name, device, kwargs}). The loader validates
eagerly and raises ConfigError naming the offending field, so a typo fails at
startup instead of surfacing as a half-built agent later.
"""
from __future__ import annotations

import importlib
from dataclasses import dataclass, field

import yaml

from flexctl.agent import Agent, config_fingerprint
from flexctl.entities import ControlApplication, DeviceModule, Entity, ProtocolModule
from flexctl.errors import ConfigError

# class name -> entity class, for configs that use bare names
_FACTORIES: dict = {}


def register_factory(name: str, cls) -> None:
    _FACTORIES[name] = cls


def _builtin_factories() -> None:
    from flexctl.simwifi import SimWifiDevice
    from flexctl.topology import LocalNeighborAggregator, TopologyMonitor

    for cls in (SimWifiDevice, LocalNeighborAggregator, TopologyMonitor):
        _FACTORIES.setdefault(cls.__name__, cls)


def resolve_class(class_name: str):
    _builtin_factories()
    if class_name in _FACTORIES:
        return _FACTORIES[class_name]
    if "." in class_name:
        module_name, _, attr = class_name.rpartition(".")
        try:
            module = importlib.import_module(module_name)
        except ImportError as exc:
            raise ConfigError(f"cannot import module {module_name!r}: {exc}") from exc
        try:
            return getattr(module, attr)
        except AttributeError:
            raise ConfigError(f"module {module_name!r} has no class {attr!r}") from None
    raise ConfigError(f"unknown entity class {class_name!r}; register it or use a dotted path")


@dataclass
class EntitySpec:
    name: str
    class_name: str
    device: str | None = None
    kwargs: dict = field(default_factory=dict)

    def build(self) -> Entity:
        cls = resolve_class(self.class_name)
        kwargs = dict(self.kwargs)
        kwargs.setdefault("name", self.name)
        if self.device is not None:
            kwargs.setdefault("device", self.device)
        try:
            entity = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad kwargs for {self.class_name} ({self.name}): {exc}") from exc
        if not isinstance(entity, Entity):
            raise ConfigError(f"{self.class_name} does not produce an entity")
        return entity

    def to_doc(self) -> dict:
        doc = {"class_name": self.class_name, "kwargs": dict(self.kwargs)}
        if self.device is not None:
            doc["device"] = self.device
        return doc


@dataclass
class AgentConfig:
    name: str = "agent"
    info: str = ""
    uuid: str | None = None
    pub_uri: str | None = None
    sub_uri: str | None = None
    hello_interval: float = 3.0
    hello_timeout: float = 9.0
    rpc_timeout: float = 60.0
    modules: list = field(default_factory=list)  # EntitySpec
    applications: list = field(default_factory=list)  # EntitySpec

    def to_doc(self) -> dict:
        agent = {
            "name": self.name,
            "info": self.info,
            "hello_interval": self.hello_interval,
            "hello_timeout": self.hello_timeout,
            "rpc_timeout": self.rpc_timeout,
        }
        if self.uuid is not None:
            agent["uuid"] = self.uuid
        if self.pub_uri is not None:
            agent["pub"] = self.pub_uri
        if self.sub_uri is not None:
            agent["sub"] = self.sub_uri
        return {
            "agent": agent,
            "applications": {s.name: s.to_doc() for s in self.applications},
            "modules": {s.name: s.to_doc() for s in self.modules},
        }

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.to_doc())


def _typed(doc: dict, key: str, types, where: str):
    value = doc.get(key)
    if value is not None and not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(f"{where}.{key} must be {names}, got {type(value).__name__}")
    return value


def _entity_specs(doc: dict, key: str, need_device: bool) -> list:
    entries = doc.get(key) or {}
    if not isinstance(entries, dict):
        raise ConfigError(f"{key} must be a mapping of name -> entry")
    specs = []
    for name, entry in entries.items():
        where = f"{key}.{name}"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a mapping")
        class_name = entry.get("class_name")
        if not isinstance(class_name, str) or not class_name:
            raise ConfigError(f"{where}.class_name is required")
        device = _typed(entry, "device", str, where)
        if need_device and not device:
            raise ConfigError(f"{where}.device is required for modules")
        kwargs = entry.get("kwargs") or {}
        if not isinstance(kwargs, dict):
            raise ConfigError(f"{where}.kwargs must be a mapping")
        specs.append(EntitySpec(str(name), class_name, device, dict(kwargs)))
    return specs


def parse_config(doc) -> AgentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a mapping")
    agent_doc = doc.get("agent") or {}
    if not isinstance(agent_doc, dict):
        raise ConfigError("agent must be a mapping")
    cfg = AgentConfig(
        name=_typed(agent_doc, "name", str, "agent") or "agent",
        info=_typed(agent_doc, "info", str, "agent") or "",
        uuid=_typed(agent_doc, "uuid", str, "agent"),
        pub_uri=_typed(agent_doc, "pub", str, "agent"),
        sub_uri=_typed(agent_doc, "sub", str, "agent"),
        hello_interval=float(_typed(agent_doc, "hello_interval", (int, float), "agent") or 3.0),
        hello_timeout=float(_typed(agent_doc, "hello_timeout", (int, float), "agent") or 9.0),
        rpc_timeout=float(_typed(agent_doc, "rpc_timeout", (int, float), "agent") or 60.0),
        modules=_entity_specs(doc, "modules", need_device=True),
        applications=_entity_specs(doc, "applications", need_device=False),
    )
    if (cfg.pub_uri is None) != (cfg.sub_uri is None):
        raise ConfigError("agent.pub and agent.sub must be given together (or omitted for standalone mode)")
    return cfg


def load_config(path: str) -> AgentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(doc)


def build_agent(cfg: AgentConfig) -> Agent:
    agent = Agent(
        name=cfg.name,
        info=cfg.info,
        uuid=cfg.uuid,
        pub_uri=cfg.pub_uri,
        sub_uri=cfg.sub_uri,
        hello_interval=cfg.hello_interval,
        hello_timeout=cfg.hello_timeout,
        rpc_timeout=cfg.rpc_timeout,
        config_hash=cfg.fingerprint,
    )
    for spec in cfg.modules:
        entity = spec.build()
        if isinstance(entity, DeviceModule):
            ok = agent.add_device_module(entity)
        elif isinstance(entity, ProtocolModule):
            ok = agent.add_protocol_module(entity)
        else:
            raise ConfigError(f"{spec.class_name} ({spec.name}) is not a device or protocol module")
        if not ok:
            raise ConfigError(f"could not attach module {spec.name}")
    for spec in cfg.applications:
        entity = spec.build()
        if not isinstance(entity, ControlApplication):
            raise ConfigError(f"{spec.class_name} ({spec.name}) is not a control application")
        if not agent.add_control_application(entity):
            raise ConfigError(f"could not attach application {spec.name}")
    return agent


def agent_from_file(path: str) -> Agent:
    return build_agent(load_config(path))
