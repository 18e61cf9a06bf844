"""Single-thread scheduler for delayed and absolute-time jobs."""
from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time

log = logging.getLogger(__name__)


class Scheduler:
    """Runs callables at requested times on the owning agent's clock.

    Pending jobs do not survive a restart. Callables must be short; long work
    belongs on an entity's serial context.
    """

    def __init__(self, clock=time.time):
        self._clock = clock
        self._heap: list = []
        self._seq = itertools.count()
        self._cv = threading.Condition()
        self._thread: threading.Thread | None = None
        self._running = False

    def now_ms(self) -> int:
        return int(self._clock() * 1000)

    def start(self) -> None:
        with self._cv:
            if self._running:
                return
            self._running = True
        self._thread = threading.Thread(target=self._loop, name="scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._cv:
            self._running = False
            self._cv.notify()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def call_at(self, due_ms: int, fn) -> None:
        with self._cv:
            heapq.heappush(self._heap, (int(due_ms), next(self._seq), fn))
            self._cv.notify()

    def call_later(self, delay_ms: int, fn) -> None:
        self.call_at(self.now_ms() + max(0, int(delay_ms)), fn)

    def _loop(self) -> None:
        while True:
            with self._cv:
                if not self._running:
                    return
                now = self.now_ms()
                if not self._heap:
                    self._cv.wait(timeout=0.5)
                    continue
                due = self._heap[0][0]
                if due > now:
                    # short cap keeps the loop responsive to clock changes
                    self._cv.wait(timeout=min((due - now) / 1000.0, 0.5))
                    continue
                _, _, fn = heapq.heappop(self._heap)
            try:
                fn()
            except Exception:
                log.exception("scheduled job failed")

    def pending(self) -> int:
        with self._cv:
            return len(self._heap)
