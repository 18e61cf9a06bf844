"""flexctl: control-plane middleware for heterogeneous wireless networks."""

from flexctl.agent import Agent
from flexctl.broker import Broker
from flexctl.entities import (
    ControlApplication,
    DeviceModule,
    ProtocolModule,
    bind_function,
    on_event,
)
from flexctl.errors import FlexctlError

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "Broker",
    "ControlApplication",
    "DeviceModule",
    "ProtocolModule",
    "bind_function",
    "on_event",
    "FlexctlError",
    "__version__",
]
