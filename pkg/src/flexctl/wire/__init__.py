from flexctl.wire.envelope import (  # noqa: F401
    DEFAULT_REGISTRY,
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
