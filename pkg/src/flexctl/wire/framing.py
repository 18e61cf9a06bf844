"""Frame codec selection: compiled extension when built, pure Python otherwise.

FLEXCTL_PURE=1 forces the pure-Python codec even if the extension is present.
"""
import os

from flexctl.wire import framing_py

if os.environ.get("FLEXCTL_PURE"):
    _impl = framing_py
    BACKEND = "python"
else:
    try:
        from flexctl.wire import _framing as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = framing_py
        BACKEND = "python"

pack_frames = _impl.pack_frames
unpack_frames = _impl.unpack_frames


def available_backends() -> dict:
    """Name -> module for every codec importable in this environment."""
    backends = {"python": framing_py}
    try:
        from flexctl.wire import _framing  # type: ignore[attr-defined]

        backends["cython"] = _framing
    except ImportError:
        pass
    return backends
