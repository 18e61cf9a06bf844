#!/usr/bin/env python3
"""Regenerate the golden wire-format fixtures in fixtures/.

Every fixture is the exact byte string a conforming peer must produce for the
inputs listed in manifest.json. Run from the repository root:

    python3 scripts/make_fixtures.py
"""
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from flexctl.wire import EnvelopeHeader, EventEnvelope, canonical_json, frame_envelope

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

NODE_A = "11111111-1111-4111-8111-111111111111"
NODE_B = "22222222-2222-4222-8222-222222222222"
ENT_B = "33333333-3333-4333-8333-333333333333"


def envelope(name, topic, event_type, payload_obj, msg_id, src_node, src_entity, sent_at, raw_payload=None):
    header = EnvelopeHeader(
        msg_id=msg_id,
        src_node=src_node,
        src_entity=src_entity,
        event_type=event_type,
        format_id="json1",
        sent_at=sent_at,
    )
    payload = canonical_json(payload_obj) if raw_payload is None else raw_payload
    env = EventEnvelope(topic=topic, header=header, payload=payload)
    return {
        "name": name,
        "file": f"{name}.bin",
        "topic": topic,
        "header": json.loads(header.to_bytes()),
        "payload_json": payload_obj if raw_payload is None else None,
        "payload_utf8": None if raw_payload is None else raw_payload.decode("utf-8"),
        "_env": env,
    }


def main():
    entries = [
        envelope(
            "hello-01",
            "sys/hello",
            "Hello",
            {"uuid": NODE_A, "config_hash": "d41d8cd98f00"},
            msg_id="aaaaaaaa-0000-4000-8000-000000000001",
            src_node=NODE_A,
            src_entity=NODE_A,
            sent_at=1700000000000,
        ),
        envelope(
            "empty-payload-02",
            "evt/PingEvent",
            "PingEvent",
            None,
            msg_id="aaaaaaaa-0000-4000-8000-000000000002",
            src_node=NODE_A,
            src_entity=NODE_A,
            sent_at=1700000000001,
            raw_payload=b"",
        ),
        envelope(
            "command-03",
            "ent/" + ENT_B,
            "sys/CommandEvent",
            {
                "operation": "set_channel",
                "target_node": NODE_B,
                "target_entity": ENT_B,
                "blocking": True,
                "delay_ms": None,
                "exec_at": None,
                "args": [11],
                "correlation_id": "aaaaaaaa-0000-4000-8000-00000000c0de",
            },
            msg_id="aaaaaaaa-0000-4000-8000-000000000003",
            src_node=NODE_A,
            src_entity=NODE_A,
            sent_at=1700000000002,
        ),
    ]
    FIXTURES.mkdir(exist_ok=True)
    manifest = []
    for entry in entries:
        env = entry.pop("_env")
        blob = frame_envelope(env)
        (FIXTURES / entry["file"]).write_bytes(blob)
        entry["size"] = len(blob)
        manifest.append(entry)
        print(f"wrote {entry['file']} ({len(blob)} bytes)")
    (FIXTURES / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print("wrote manifest.json")


if __name__ == "__main__":
    main()
