"""Wire format: one JSON object per line, ids echoed on every reply.

A frame is ``{"id": <int>, "kind": <str>, "payload": <object>}``. Clients
send ``fit``, ``impute``, ``loss``, and ``shutdown``; servers answer with
``ok``, ``result``, or ``error``. Window payloads carry ``values`` (numbers,
``null`` at hidden positions) and a 0/1 ``mask`` of the same length.
"""

from __future__ import annotations

import json

REQUEST_KINDS = ("fit", "impute", "loss", "shutdown")
REPLY_KINDS = ("ok", "result", "error")


class ProtocolError(ValueError):
    """A frame that violates the message shape, as opposed to bad JSON."""


def serialize(rid: int | None, kind: str, payload: dict) -> str:
    """Compact single-line frame without the trailing newline."""
    if kind not in REQUEST_KINDS + REPLY_KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    return json.dumps({"id": rid, "kind": kind, "payload": payload}, separators=(",", ":"))


def parse_message(line: str) -> dict:
    """Any frame, request or reply; raises on bad JSON or bad shape."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    rid = obj.get("id")
    if rid is not None and not isinstance(rid, int):
        raise ProtocolError(f"frame id must be an integer, got {rid!r}")
    kind = obj.get("kind")
    if kind not in REQUEST_KINDS + REPLY_KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    payload = obj.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object")
    return {"id": rid, "kind": kind, "payload": payload}


def parse_request(line: str) -> dict:
    msg = parse_message(line)
    if msg["kind"] not in REQUEST_KINDS:
        raise ProtocolError(f"{msg['kind']!r} is a reply kind, not a request")
    if msg["id"] is None:
        raise ProtocolError("requests must carry an integer id")
    return msg


def ok_reply(rid: int) -> str:
    return serialize(rid, "ok", {})


def result_reply(rid: int, payload: dict) -> str:
    return serialize(rid, "result", payload)


def error_reply(rid: int | None, message: str) -> str:
    return serialize(rid, "error", {"message": message})
