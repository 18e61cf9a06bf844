"""Blocking TCP transport speaking the length-prefixed triple-frame protocol."""
from __future__ import annotations

import re
import socket
import struct
import threading

from flexctl.errors import ConfigError, FramingError

_LEN = struct.Struct(">I")
_URI_RE = re.compile(r"^tcp://([^:/]+):(\d+)$")

# Control topics exchanged on subscriber connections; never valid envelope
# topics, so they cannot collide with routed traffic.
SUB_TOPIC = b"+sub"
UNSUB_TOPIC = b"-sub"

MAX_FRAME = 64 * 1024 * 1024


def parse_endpoint(uri: str) -> tuple:
    """'tcp://host:port' -> (host, port)."""
    m = _URI_RE.match(uri or "")
    if not m:
        raise ConfigError(f"invalid tcp endpoint {uri!r} (expected tcp://HOST:PORT)")
    return m.group(1), int(m.group(2))


class MessageStream:
    """One connected socket carrying triple-frame messages.

    Sends are serialized with a lock so a stream may be written from several
    threads; reads are expected from a single reader thread.
    """

    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._rfile = sock.makefile("rb")
        self._wlock = threading.Lock()
        self.bytes_sent = 0
        self.bytes_received = 0
        self.messages_sent = 0
        self.messages_received = 0

    def send(self, topic: bytes, header: bytes, payload: bytes) -> None:
        data = b"".join(
            (
                _LEN.pack(len(topic)),
                topic,
                _LEN.pack(len(header)),
                header,
                _LEN.pack(len(payload)),
                payload,
            )
        )
        with self._wlock:
            self._sock.sendall(data)
            self.bytes_sent += len(data)
            self.messages_sent += 1

    def _read_exact(self, n: int) -> bytes:
        data = self._rfile.read(n)
        if data is None or len(data) < n:
            raise ConnectionError("peer closed")
        return data

    def _read_frame(self) -> bytes:
        (length,) = _LEN.unpack(self._read_exact(4))
        if length > MAX_FRAME:
            raise FramingError(f"frame of {length} bytes exceeds limit")
        frame = self._read_exact(length) if length else b""
        self.bytes_received += 4 + length
        return frame

    def recv(self):
        """Next (topic, header, payload) or None when the peer hung up."""
        try:
            topic = self._read_frame()
        except (ConnectionError, OSError, ValueError):
            return None
        try:
            header = self._read_frame()
            payload = self._read_frame()
        except (ConnectionError, OSError, ValueError):
            return None
        self.messages_received += 1
        return topic, header, payload

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


def connect(host: str, port: int, timeout: float = 5.0) -> MessageStream:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return MessageStream(sock)
