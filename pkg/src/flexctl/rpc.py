"""Remote procedure calls on top of unicast events.

A call is fully described by a CallingContext (WHAT/WHERE/HOW/WHEN plus
correlation identity), shipped inside a CommandEvent envelope and answered by
exactly one ResponseEvent or a local timeout.
"""
from __future__ import annotations

import logging
import threading
import uuid as uuidlib
from dataclasses import dataclass, field

from flexctl.errors import InvalidSchedule, RemoteExecutionError, RpcTimeout

log = logging.getLogger(__name__)

COMMAND_EVENT = "sys/CommandEvent"
RESPONSE_EVENT = "sys/ResponseEvent"


@dataclass
class CallingContext:
    operation: str
    target_node: str
    target_entity: str
    blocking: bool = True
    callback_registered: bool = False
    delay_ms: int | None = None
    exec_at: int | None = None  # UNIX ms, interpreted on the executing node's clock
    args: list = field(default_factory=list)
    correlation_id: str = field(default_factory=lambda: str(uuidlib.uuid4()))

    def validate(self) -> None:
        if self.delay_ms is not None and self.exec_at is not None:
            raise InvalidSchedule("delay and exec_time are mutually exclusive")
        if self.delay_ms is not None and self.delay_ms < 0:
            raise InvalidSchedule("delay must be non-negative")
        if self.blocking and (
            self.delay_ms is not None or self.exec_at is not None or self.callback_registered
        ):
            raise InvalidSchedule("a blocking call cannot carry schedule or callback modifiers")

    def to_payload(self) -> dict:
        return {
            "operation": self.operation,
            "target_node": self.target_node,
            "target_entity": self.target_entity,
            "blocking": self.blocking,
            "delay_ms": self.delay_ms,
            "exec_at": self.exec_at,
            "args": self.args,
            "correlation_id": self.correlation_id,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "CallingContext":
        return cls(
            operation=doc["operation"],
            target_node=doc["target_node"],
            target_entity=doc["target_entity"],
            blocking=bool(doc.get("blocking", False)),
            delay_ms=doc.get("delay_ms"),
            exec_at=doc.get("exec_at"),
            args=list(doc.get("args") or []),
            correlation_id=doc["correlation_id"],
        )


def ok_response(correlation_id: str, value) -> dict:
    return {"correlation_id": correlation_id, "status": "ok", "value": value, "error": None}


def error_response(correlation_id: str, error_class: str, message: str, diagnostic: str = "") -> dict:
    return {
        "correlation_id": correlation_id,
        "status": "error",
        "value": None,
        "error": {"class": error_class, "message": message, "diagnostic": diagnostic},
    }


class _Completion:
    def __init__(self):
        self._event = threading.Event()
        self._value = None
        self._error: Exception | None = None

    def resolve(self, value) -> None:
        self._value = value
        self._event.set()

    def fail(self, error: Exception) -> None:
        self._error = error
        self._event.set()

    def result(self):
        self._event.wait()
        if self._error is not None:
            raise self._error
        return self._value


@dataclass
class _Pending:
    completion: _Completion | None
    callback: object
    caller_entity: str | None


class PendingCallTable:
    """Correlation id -> completion slot or callback; entries never leak."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict = {}

    def add(self, correlation_id: str, entry: _Pending) -> None:
        with self._lock:
            self._entries[correlation_id] = entry

    def pop(self, correlation_id: str):
        with self._lock:
            return self._entries.pop(correlation_id, None)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class RpcEngine:
    """Client half of the RPC mechanism hosted inside an agent."""

    def __init__(self, agent, default_timeout: float = 60.0):
        self._agent = agent
        self._pending = PendingCallTable()
        self.default_timeout = default_timeout

    @property
    def pending_calls(self) -> int:
        return len(self._pending)

    def invoke(self, ctx: CallingContext, caller_entity: str | None = None, callback=None, timeout: float | None = None):
        """Blocking: wait for the value. Non-blocking: return the correlation id."""
        ctx.validate()
        timeout = self.default_timeout if timeout is None else timeout
        now = self._agent.now_ms()
        schedule_slack = 0
        if ctx.delay_ms is not None:
            schedule_slack = ctx.delay_ms
        elif ctx.exec_at is not None:
            schedule_slack = max(0, ctx.exec_at - now)
        deadline_ms = now + schedule_slack + int(timeout * 1000)

        completion = _Completion() if ctx.blocking else None
        self._pending.add(ctx.correlation_id, _Pending(completion, callback, caller_entity))
        self._agent.scheduler.call_at(deadline_ms, lambda: self._expire(ctx.correlation_id))
        try:
            self._agent.send_command(ctx, src_entity=caller_entity)
        except Exception:
            self._pending.pop(ctx.correlation_id)
            raise
        if ctx.blocking:
            return completion.result()
        return ctx.correlation_id

    def resolve(self, response: dict) -> None:
        entry = self._pending.pop(response.get("correlation_id"))
        if entry is None:
            log.debug("response for unknown or already-completed call %s", response.get("correlation_id"))
            return
        if response.get("status") == "ok":
            value = response.get("value")
            if entry.completion is not None:
                entry.completion.resolve(value)
            elif entry.callback is not None:
                self._dispatch_callback(entry, value)
        else:
            err = response.get("error") or {}
            exc = RemoteExecutionError(
                err.get("class", "UnknownError"), err.get("message", ""), err.get("diagnostic", "")
            )
            if entry.completion is not None:
                entry.completion.fail(exc)
            else:
                log.error("non-blocking call failed remotely: %s", exc)

    def _dispatch_callback(self, entry: _Pending, value) -> None:
        caller = self._agent.get_entity(entry.caller_entity) if entry.caller_entity else None
        if caller is not None and caller.is_started:
            if not caller.post(lambda: entry.callback(value)):
                log.debug("caller entity gone, dropping callback result")
        else:
            try:
                entry.callback(value)
            except Exception:
                log.exception("rpc callback failed")

    def _expire(self, correlation_id: str) -> None:
        entry = self._pending.pop(correlation_id)
        if entry is None:
            return
        if entry.completion is not None:
            entry.completion.fail(RpcTimeout(f"call {correlation_id} timed out"))
        else:
            log.error("non-blocking call %s timed out", correlation_id)
