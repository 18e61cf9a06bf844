import json
import pathlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexctl.errors import FramingError, InvalidTopicKey, SerializationError
from flexctl.wire import (
    EnvelopeHeader,
    EventEnvelope,
    SerializerRegistry,
    canonical_json,
    decode_envelope,
    encode_envelope,
    frame_envelope,
    make_envelope,
    topic_for,
    unframe_envelope,
    valid_topic,
)
from flexctl.wire import framing, framing_py

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def header_strategy():
    text = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())
    return st.builds(
        EnvelopeHeader,
        msg_id=st.uuids().map(str),
        src_node=st.uuids().map(str),
        src_entity=st.uuids().map(str),
        event_type=text,
        format_id=st.just("json1"),
        sent_at=st.integers(min_value=0, max_value=2**53),
    )


def envelope_strategy():
    key = st.text(min_size=1, max_size=30).filter(lambda s: s.strip())
    topic = st.sampled_from(["global", "node", "entity", "system"]).flatmap(
        lambda scope: key.map(lambda k: topic_for(scope, k))
    )
    return st.builds(
        EventEnvelope,
        topic=topic,
        header=header_strategy(),
        payload=st.binary(max_size=2048),
    )


@settings(max_examples=300, deadline=None)
@given(envelope_strategy())
def test_roundtrip_property(env):
    assert decode_envelope(encode_envelope(env)) == env
    assert unframe_envelope(frame_envelope(env)) == env


@given(envelope_strategy())
@settings(max_examples=100, deadline=None)
def test_encode_deterministic(env):
    assert frame_envelope(env) == frame_envelope(env)


def test_backends_agree():
    backends = framing.available_backends()
    frames = (b"evt/X", b'{"a":1}', b"\x00\x01payload")
    blobs = {name: mod.pack_frames(*frames) for name, mod in backends.items()}
    assert len(set(blobs.values())) == 1
    for mod in backends.values():
        assert mod.unpack_frames(next(iter(blobs.values()))) == frames


@given(st.binary(max_size=256), st.binary(max_size=256), st.binary(max_size=4096))
@settings(max_examples=150, deadline=None)
def test_backend_parity_property(topic, header, payload):
    backends = framing.available_backends()
    packed = {name: mod.pack_frames(topic, header, payload) for name, mod in backends.items()}
    assert len(set(packed.values())) == 1
    blob = next(iter(packed.values()))
    for mod in backends.values():
        assert mod.unpack_frames(blob) == (topic, header, payload)


def test_truncated_frames_rejected():
    blob = framing_py.pack_frames(b"evt/X", b"{}", b"abc")
    for cut in (1, 5, len(blob) - 1):
        with pytest.raises(FramingError):
            framing_py.unpack_frames(blob[:cut])
    with pytest.raises(FramingError):
        framing_py.unpack_frames(blob + b"junk")


def test_decode_wrong_frame_count():
    with pytest.raises(FramingError):
        decode_envelope((b"evt/X", b"{}"))


def test_topic_scheme():
    assert topic_for("global", "NewNodeEvent") == "evt/NewNodeEvent"
    assert topic_for("node", "3f2a") == "node/3f2a"
    assert topic_for("entity", "3f2a") == "ent/3f2a"
    assert topic_for("system", "hello") == "sys/hello"
    with pytest.raises(InvalidTopicKey):
        topic_for("global", "  ")
    with pytest.raises(InvalidTopicKey):
        topic_for("bogus", "x")
    assert valid_topic("evt/X")
    assert not valid_topic("evt/")
    assert not valid_topic("random/X")


def test_header_canonical_json():
    h = EnvelopeHeader("m", "n", "e", "T", "json1", 5)
    raw = h.to_bytes()
    doc = json.loads(raw)
    assert raw == canonical_json(doc)
    assert list(doc) == sorted(doc)
    assert b" " not in raw


def test_header_missing_field():
    with pytest.raises(SerializationError):
        EnvelopeHeader.from_bytes(b'{"msg_id":"x"}')
    with pytest.raises(SerializationError):
        EnvelopeHeader.from_bytes(b"not json")


def test_empty_payload_three_frames():
    env = make_envelope("evt/Ping", "Ping", None, src_node="n", src_entity="e")
    env.payload = b""
    frames = encode_envelope(env)
    assert len(frames) == 3 and frames[2] == b""


def test_unknown_format_encode_rejected():
    env = make_envelope("evt/Ping", "Ping", {"a": 1}, src_node="n", src_entity="e")
    env.header.format_id = "msgpack9"
    with pytest.raises(SerializationError):
        encode_envelope(env)


def test_unknown_format_decodes_lazily():
    env = make_envelope("evt/Ping", "Ping", {"a": 1}, src_node="n", src_entity="e")
    frames = encode_envelope(env)
    header = json.loads(frames[1])
    header["format_id"] = "msgpack9"
    decoded = decode_envelope((frames[0], canonical_json(header), frames[2]))
    assert decoded.header.format_id == "msgpack9"
    assert decoded.payload == env.payload  # opaque, untouched


def test_registry_contract():
    reg = SerializerRegistry()
    assert reg.has("json1")
    with pytest.raises(SerializationError):
        reg.get("nope")
    reg.register("rev1", lambda o: bytes(reversed(canonical_json(o))), lambda b: json.loads(bytes(reversed(b))))
    assert reg.deserialize("rev1", reg.serialize("rev1", {"k": 2})) == {"k": 2}


def test_golden_fixtures_byte_stable():
    manifest = json.loads((FIXTURES / "manifest.json").read_text())
    assert {m["name"] for m in manifest} == {"hello-01", "empty-payload-02", "command-03"}
    for entry in manifest:
        blob = (FIXTURES / entry["file"]).read_bytes()
        env = unframe_envelope(blob)
        assert env.topic == entry["topic"]
        assert json.loads(env.header.to_bytes()) == entry["header"]
        if entry["payload_json"] is not None:
            assert json.loads(env.payload) == entry["payload_json"]
        else:
            assert env.payload == entry["payload_utf8"].encode()
        # re-encoding the decoded envelope reproduces the file exactly
        assert frame_envelope(env) == blob
