"""Exception hierarchy shared by all flexctl components."""


class FlexctlError(Exception):
    """Base class for every framework error."""


class FramingError(FlexctlError):
    """A byte stream does not form a valid three-frame message."""


class SerializationError(FlexctlError):
    """Malformed header, unregistered payload format, or unserializable value."""


class InvalidTopicKey(FlexctlError):
    """Empty or whitespace-only topic key."""


class BindError(FlexctlError):
    """A broker endpoint could not be bound."""


class ConfigError(FlexctlError):
    """Agent configuration file is missing, malformed, or incomplete."""


class InvalidTarget(FlexctlError):
    """Event routing mode requires a target that was not supplied."""


class NodeUnknown(FlexctlError):
    """Target node is not (or no longer) present in the node registry."""


class EntityUnknown(FlexctlError):
    """No entity with the given uuid or index."""


class UnsupportedOperation(FlexctlError):
    """Operation name is not in the target entity's capability set."""


class RpcTimeout(FlexctlError):
    """No ResponseEvent arrived before the call deadline."""


class RemoteExecutionError(FlexctlError):
    """The remote operation raised; carries the remote error descriptor."""

    def __init__(self, error_class: str, message: str, diagnostic: str = ""):
        super().__init__(f"{error_class}: {message}")
        self.error_class = error_class
        self.message = message
        self.diagnostic = diagnostic


class InvalidSchedule(FlexctlError):
    """Execution time in the past, or delay and exec_time both set."""


class DuplicateBinding(FlexctlError):
    """Operation name already bound on this entity."""


class NotStarted(FlexctlError):
    """Entity method requires the entity to be started."""


class OutOfRange(FlexctlError):
    """Device parameter outside its allowed range."""
