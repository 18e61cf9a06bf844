"""Message envelope, topic scheme, and pluggable payload serialization.

Every message in the control plane is an EventEnvelope: a topic string, a
JSON header, and an opaque payload. The header is always JSON so routing
never needs to decode the payload; payload decoding happens lazily at the
consuming entity.
"""
from __future__ import annotations

import json
import time
import uuid as uuidlib
from dataclasses import dataclass, field

from flexctl.errors import FramingError, InvalidTopicKey, SerializationError
from flexctl.wire import framing

TOPIC_PREFIXES = ("evt/", "node/", "ent/", "sys/")

_SCOPE_PREFIX = {
    "global": "evt/",
    "node": "node/",
    "entity": "ent/",
    "system": "sys/",
}


def canonical_json(obj) -> bytes:
    """Deterministic JSON bytes: sorted keys, no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def topic_for(scope: str, key: str) -> str:
    """Build a topic for one of the four scopes (global/node/entity/system)."""
    try:
        prefix = _SCOPE_PREFIX[scope]
    except KeyError:
        raise InvalidTopicKey(f"unknown topic scope {scope!r}") from None
    if not isinstance(key, str) or not key.strip():
        raise InvalidTopicKey(f"empty key for scope {scope!r}")
    return prefix + key


def valid_topic(topic: str) -> bool:
    return any(topic.startswith(p) and len(topic) > len(p) for p in TOPIC_PREFIXES)


_HEADER_FIELDS = ("msg_id", "src_node", "src_entity", "event_type", "format_id", "sent_at")


@dataclass
class EnvelopeHeader:
    msg_id: str
    src_node: str
    src_entity: str
    event_type: str
    format_id: str = "json1"
    sent_at: int = 0  # UNIX milliseconds

    def to_bytes(self) -> bytes:
        return canonical_json(
            {
                "msg_id": self.msg_id,
                "src_node": self.src_node,
                "src_entity": self.src_entity,
                "event_type": self.event_type,
                "format_id": self.format_id,
                "sent_at": self.sent_at,
            }
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EnvelopeHeader":
        try:
            doc = json.loads(data.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise SerializationError(f"malformed envelope header: {exc}") from None
        if not isinstance(doc, dict):
            raise SerializationError("envelope header is not a JSON object")
        missing = [f for f in _HEADER_FIELDS if f not in doc]
        if missing:
            raise SerializationError(f"envelope header missing fields: {missing}")
        return cls(**{f: doc[f] for f in _HEADER_FIELDS})


@dataclass
class EventEnvelope:
    topic: str
    header: EnvelopeHeader
    payload: bytes = b""


class SerializerRegistry:
    """Maps format_id -> (serialize, deserialize).

    "json1" is always registered. Lookups of unknown format ids fail loudly;
    mutation is expected only during agent startup.
    """

    def __init__(self):
        self._formats = {}
        self.register("json1", canonical_json, lambda b: json.loads(b.decode("utf-8")))

    def register(self, format_id: str, serialize, deserialize) -> None:
        self._formats[format_id] = (serialize, deserialize)

    def has(self, format_id: str) -> bool:
        return format_id in self._formats

    def get(self, format_id: str):
        try:
            return self._formats[format_id]
        except KeyError:
            raise SerializationError(f"unregistered payload format {format_id!r}") from None

    def serialize(self, format_id: str, obj) -> bytes:
        serialize, _ = self.get(format_id)
        try:
            return serialize(obj)
        except SerializationError:
            raise
        except Exception as exc:
            raise SerializationError(f"cannot serialize payload: {exc}") from None

    def deserialize(self, format_id: str, data: bytes):
        _, deserialize = self.get(format_id)
        try:
            return deserialize(data)
        except Exception as exc:
            raise SerializationError(f"cannot deserialize payload: {exc}") from None


DEFAULT_REGISTRY = SerializerRegistry()


def make_envelope(
    topic: str,
    event_type: str,
    data,
    src_node: str,
    src_entity: str,
    format_id: str = "json1",
    registry: SerializerRegistry | None = None,
    sent_at: int | None = None,
) -> EventEnvelope:
    registry = registry or DEFAULT_REGISTRY
    header = EnvelopeHeader(
        msg_id=str(uuidlib.uuid4()),
        src_node=src_node,
        src_entity=src_entity,
        event_type=event_type,
        format_id=format_id,
        sent_at=int(time.time() * 1000) if sent_at is None else int(sent_at),
    )
    return EventEnvelope(topic=topic, header=header, payload=registry.serialize(format_id, data))


def encode_envelope(env: EventEnvelope, registry: SerializerRegistry | None = None) -> tuple:
    """Envelope -> (topic bytes, header bytes, payload bytes)."""
    registry = registry or DEFAULT_REGISTRY
    if not valid_topic(env.topic):
        raise InvalidTopicKey(f"topic {env.topic!r} does not match the topic scheme")
    if not registry.has(env.header.format_id):
        raise SerializationError(f"unregistered payload format {env.header.format_id!r}")
    return (env.topic.encode("utf-8"), env.header.to_bytes(), bytes(env.payload))


def decode_envelope(frames) -> EventEnvelope:
    """Inverse of encode_envelope. The payload stays opaque (lazy decoding)."""
    frames = tuple(frames)
    if len(frames) != 3:
        raise FramingError(f"expected 3 frames, got {len(frames)}")
    topic_b, header_b, payload_b = frames
    try:
        topic = topic_b.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SerializationError(f"topic is not UTF-8: {exc}") from None
    return EventEnvelope(topic=topic, header=EnvelopeHeader.from_bytes(header_b), payload=bytes(payload_b))


def frame_envelope(env: EventEnvelope, registry: SerializerRegistry | None = None) -> bytes:
    """Single byte string as written to the transport and to golden files."""
    return framing.pack_frames(*encode_envelope(env, registry))


def unframe_envelope(data: bytes) -> EventEnvelope:
    return decode_envelope(framing.unpack_frames(data))
