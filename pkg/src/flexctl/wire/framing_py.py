"""Pure-Python frame codec.

A message is exactly three frames (topic, header, payload), each prefixed
with a 4-byte big-endian length. The same byte layout is used on the TCP
transport and in the golden fixture files.
"""
import struct

from flexctl.errors import FramingError

_LEN = struct.Struct(">I")


def pack_frames(topic: bytes, header: bytes, payload: bytes) -> bytes:
    return b"".join(
        (
            _LEN.pack(len(topic)),
            topic,
            _LEN.pack(len(header)),
            header,
            _LEN.pack(len(payload)),
            payload,
        )
    )


def unpack_frames(buf: bytes) -> tuple:
    frames = []
    off = 0
    n = len(buf)
    while off < n:
        if off + 4 > n:
            raise FramingError("truncated length prefix at offset %d" % off)
        (length,) = _LEN.unpack_from(buf, off)
        off += 4
        if off + length > n:
            raise FramingError("truncated frame body at offset %d" % off)
        frames.append(bytes(buf[off : off + length]))
        off += length
    if len(frames) != 3:
        raise FramingError("expected 3 frames, got %d" % len(frames))
    return tuple(frames)
