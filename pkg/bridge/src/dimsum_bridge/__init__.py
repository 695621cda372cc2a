"""Reference server half of the dimsum external-imputer protocol."""

from .adapters import ADAPTERS, LinearInterpAdapter, ZeroFillAdapter
from .protocol import ProtocolError, error_reply, ok_reply, parse_message, parse_request, result_reply, serialize
from .server import BridgeServer

__all__ = [
    "ADAPTERS",
    "BridgeServer",
    "LinearInterpAdapter",
    "ProtocolError",
    "ZeroFillAdapter",
    "error_reply",
    "ok_reply",
    "parse_message",
    "parse_request",
    "result_reply",
    "serialize",
]
