/**
 * Event envelope: topic string, canonical-JSON header, opaque payload.
 * The header carries exactly six fields; their canonical ordering is part
 * of the wire contract.
 */
import { Json, canonicalJsonBytes } from "./canon";
import { packFrames, unpackFrames } from "./framing";

export interface EnvelopeHeader {
  msg_id: string;
  src_node: string;
  src_entity: string;
  event_type: string;
  format_id: string;
  sent_at: number;
}

export interface Envelope {
  topic: string;
  header: EnvelopeHeader;
  payload: Buffer;
}

const HEADER_FIELDS = ["msg_id", "src_node", "src_entity", "event_type", "format_id", "sent_at"] as const;

export function headerToBytes(header: EnvelopeHeader): Buffer {
  return canonicalJsonBytes({
    msg_id: header.msg_id,
    src_node: header.src_node,
    src_entity: header.src_entity,
    event_type: header.event_type,
    format_id: header.format_id,
    sent_at: header.sent_at,
  });
}

export function headerFromBytes(data: Buffer): EnvelopeHeader {
  const doc = JSON.parse(data.toString("utf-8"));
  for (const field of HEADER_FIELDS) {
    if (!(field in doc)) {
      throw new Error(`header missing field ${field}`);
    }
  }
  return {
    msg_id: doc.msg_id,
    src_node: doc.src_node,
    src_entity: doc.src_entity,
    event_type: doc.event_type,
    format_id: doc.format_id,
    sent_at: doc.sent_at,
  };
}

export function encodeEnvelope(env: Envelope): [Buffer, Buffer, Buffer] {
  return [Buffer.from(env.topic, "utf-8"), headerToBytes(env.header), env.payload];
}

export function decodeEnvelope(frames: [Buffer, Buffer, Buffer]): Envelope {
  return {
    topic: frames[0].toString("utf-8"),
    header: headerFromBytes(frames[1]),
    payload: frames[2],
  };
}

export function frameEnvelope(env: Envelope): Buffer {
  const [topic, header, payload] = encodeEnvelope(env);
  return packFrames(topic, header, payload);
}

export function unframeEnvelope(data: Buffer): Envelope {
  return decodeEnvelope(unpackFrames(data));
}

export function makeEnvelope(
  topic: string,
  eventType: string,
  data: Json,
  srcNode: string,
  srcEntity: string
): Envelope {
  return {
    topic,
    header: {
      msg_id: randomUuid(),
      src_node: srcNode,
      src_entity: srcEntity,
      event_type: eventType,
      format_id: "json1",
      sent_at: Date.now(),
    },
    payload: canonicalJsonBytes(data),
  };
}

function randomUuid(): string {
  // crypto.randomUUID exists on node 20
  return require("node:crypto").randomUUID();
}
