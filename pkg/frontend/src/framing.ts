/**
 * Triple-frame wire format: every message is exactly three frames
 * (topic, header, payload), each a 4-byte big-endian length prefix
 * followed by that many bytes.
 */

export const MAX_FRAME = 64 * 1024 * 1024;

export class FramingError extends Error {}

export function packFrames(topic: Buffer, header: Buffer, payload: Buffer): Buffer {
  const parts: Buffer[] = [];
  for (const frame of [topic, header, payload]) {
    const len = Buffer.alloc(4);
    len.writeUInt32BE(frame.length, 0);
    parts.push(len, frame);
  }
  return Buffer.concat(parts);
}

export function unpackFrames(data: Buffer): [Buffer, Buffer, Buffer] {
  const frames: Buffer[] = [];
  let offset = 0;
  while (offset < data.length) {
    if (frames.length === 3) {
      throw new FramingError(`trailing bytes after 3 frames at offset ${offset}`);
    }
    if (offset + 4 > data.length) {
      throw new FramingError(`truncated length prefix at offset ${offset}`);
    }
    const length = data.readUInt32BE(offset);
    if (length > MAX_FRAME) {
      throw new FramingError(`frame of ${length} bytes exceeds limit`);
    }
    offset += 4;
    if (offset + length > data.length) {
      throw new FramingError(`truncated frame body at offset ${offset}`);
    }
    frames.push(data.subarray(offset, offset + length));
    offset += length;
  }
  if (frames.length !== 3) {
    throw new FramingError(`expected 3 frames, got ${frames.length}`);
  }
  return [frames[0], frames[1], frames[2]];
}

/**
 * Incremental parser for a TCP stream of triple-frame messages.
 * Feed it chunks; it emits complete [topic, header, payload] messages.
 */
export class FrameReader {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Array<[Buffer, Buffer, Buffer]> {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
    const messages: Array<[Buffer, Buffer, Buffer]> = [];
    for (;;) {
      const parsed = this.tryParseOne();
      if (parsed === null) {
        return messages;
      }
      messages.push(parsed);
    }
  }

  private tryParseOne(): [Buffer, Buffer, Buffer] | null {
    const frames: Buffer[] = [];
    let offset = 0;
    for (let i = 0; i < 3; i++) {
      if (offset + 4 > this.buffer.length) {
        return null;
      }
      const length = this.buffer.readUInt32BE(offset);
      if (length > MAX_FRAME) {
        throw new FramingError(`frame of ${length} bytes exceeds limit`);
      }
      offset += 4;
      if (offset + length > this.buffer.length) {
        return null;
      }
      frames.push(this.buffer.subarray(offset, offset + length));
      offset += length;
    }
    // copy out before discarding the backing buffer
    const message: [Buffer, Buffer, Buffer] = [
      Buffer.from(frames[0]),
      Buffer.from(frames[1]),
      Buffer.from(frames[2]),
    ];
    this.buffer = Buffer.from(this.buffer.subarray(offset));
    return message;
  }
}
