"""Standalone topic-forwarding broker.

Publishers connect to the frontend endpoint and send envelopes; subscribers
connect to the backend endpoint, announce topic prefixes with +sub/-sub
control messages, and receive every envelope whose topic prefix-matches one
of their subscriptions. Forwarding is best-effort at-most-once: a slow
subscriber's queue drops the newest envelopes beyond the high-water mark.
"""
from __future__ import annotations

import itertools
import json
import logging
import queue
import socket
import threading

from flexctl.errors import BindError
from flexctl.transport import SUB_TOPIC, UNSUB_TOPIC, MessageStream, parse_endpoint

log = logging.getLogger(__name__)


class _Subscriber:
    def __init__(self, conn_id: int, stream: MessageStream, hwm: int):
        self.conn_id = conn_id
        self.stream = stream
        self.prefixes = set()
        self.queue = queue.Queue(maxsize=hwm)

    def offer(self, msg) -> bool:
        try:
            self.queue.put_nowait(msg)
            return True
        except queue.Full:
            return False


class Broker:
    def __init__(self, frontend: str, backend: str, hwm: int = 10_000, admin: str | None = None):
        self.frontend = frontend
        self.backend = backend
        self.hwm = hwm
        self.admin = admin
        self._lock = threading.Lock()
        self._subscribers = {}  # conn_id -> _Subscriber
        self._conn_ids = itertools.count(1)
        self._listeners = []
        self._threads = []
        self._stopped = threading.Event()
        self.forwarded = 0
        self.dropped = 0
        self.publisher_connections = 0

    # -- lifecycle ---------------------------------------------------------

    def _bind(self, uri: str) -> socket.socket:
        host, port = parse_endpoint(uri)
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            sock.close()
            raise BindError(f"cannot bind {uri}: {exc}") from None
        sock.listen(128)
        return sock

    def start(self) -> None:
        front = self._bind(self.frontend)
        back = self._bind(self.backend)
        self._listeners = [front, back]
        self._spawn(self._accept_loop, front, self._serve_publisher, name="broker-front")
        self._spawn(self._accept_loop, back, self._serve_subscriber, name="broker-back")
        if self.admin:
            adm = self._bind(self.admin)
            self._listeners.append(adm)
            self._spawn(self._accept_loop, adm, self._serve_admin, name="broker-admin")
        log.info("broker up: frontend=%s backend=%s", self.frontend, self.backend)

    def stop(self) -> None:
        self._stopped.set()
        for sock in self._listeners:
            try:
                sock.close()
            except OSError:
                pass
        with self._lock:
            subs = list(self._subscribers.values())
        for sub in subs:
            sub.stream.close()

    def wait(self) -> None:
        self._stopped.wait()

    def run_forever(self) -> None:
        self.start()
        self.wait()

    def _spawn(self, fn, *args, name: str) -> None:
        t = threading.Thread(target=fn, args=args, name=name, daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_loop(self, listener: socket.socket, handler) -> None:
        while not self._stopped.is_set():
            try:
                conn, _addr = listener.accept()
            except OSError:
                return
            threading.Thread(target=handler, args=(conn,), daemon=True).start()

    # -- publishers --------------------------------------------------------

    def _serve_publisher(self, conn: socket.socket) -> None:
        stream = MessageStream(conn)
        with self._lock:
            self.publisher_connections += 1
        try:
            while True:
                msg = stream.recv()
                if msg is None:
                    return
                self._forward(*msg)
        finally:
            with self._lock:
                self.publisher_connections -= 1
            stream.close()

    def _forward(self, topic: bytes, header: bytes, payload: bytes) -> None:
        with self._lock:
            targets = [s for s in self._subscribers.values() if any(topic.startswith(p) for p in s.prefixes)]
        if not targets:
            with self._lock:
                self.dropped += 1
            return
        delivered = 0
        overflow = 0
        for sub in targets:
            if sub.offer((topic, header, payload)):
                delivered += 1
            else:
                overflow += 1
        with self._lock:
            self.forwarded += delivered
            self.dropped += overflow

    # -- subscribers -------------------------------------------------------

    def _serve_subscriber(self, conn: socket.socket) -> None:
        stream = MessageStream(conn)
        sub = _Subscriber(next(self._conn_ids), stream, self.hwm)
        with self._lock:
            self._subscribers[sub.conn_id] = sub
        writer = threading.Thread(target=self._subscriber_writer, args=(sub,), daemon=True)
        writer.start()
        try:
            while True:
                msg = stream.recv()
                if msg is None:
                    return
                topic, _header, payload = msg
                prefix = bytes(payload)
                if topic == SUB_TOPIC:
                    with self._lock:
                        sub.prefixes.add(prefix)
                elif topic == UNSUB_TOPIC:
                    with self._lock:
                        sub.prefixes.discard(prefix)
                else:
                    log.warning("unexpected message on subscriber connection %d", sub.conn_id)
        finally:
            with self._lock:
                self._subscribers.pop(sub.conn_id, None)
            sub.queue.put(None)
            stream.close()

    def _subscriber_writer(self, sub: _Subscriber) -> None:
        while True:
            msg = sub.queue.get()
            if msg is None:
                return
            try:
                sub.stream.send(*msg)
            except OSError:
                return

    # -- admin -------------------------------------------------------------

    def stats(self) -> dict:
        with self._lock:
            return {
                "forwarded": self.forwarded,
                "dropped": self.dropped,
                "subscriptions": sum(len(s.prefixes) for s in self._subscribers.values()),
                "subscriber_connections": len(self._subscribers),
                "publisher_connections": self.publisher_connections,
            }

    def _serve_admin(self, conn: socket.socket) -> None:
        try:
            rfile = conn.makefile("rb")
            wfile = conn.makefile("wb")
            for _line in rfile:
                wfile.write(json.dumps(self.stats()).encode() + b"\n")
                wfile.flush()
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass


def fetch_stats(admin_uri: str, timeout: float = 5.0) -> dict:
    """Query a running broker's admin endpoint."""
    host, port = parse_endpoint(admin_uri)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(b"stats\n")
        rfile = sock.makefile("rb")
        line = rfile.readline()
    return json.loads(line)
