"""Request loop serving one adapter over stdio.

One frame per line, one reply per request, ids echoed back. Recoverable
problems (bad JSON, bad shape, use before fit) produce an error reply and
the loop continues; an unexpected exception produces an error reply and the
process exits 1 so the client sees a dead pipe rather than silence.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .adapters import AdapterError
from .protocol import ProtocolError, error_reply, ok_reply, parse_request, result_reply


def _frame_id(raw: str):
    """Best-effort id recovery so even malformed frames get an addressed
    error reply when possible."""
    try:
        obj = json.loads(raw)
    except ValueError:
        return None
    rid = obj.get("id") if isinstance(obj, dict) else None
    return rid if isinstance(rid, int) else None


def _mse(payload: dict) -> float:
    pred = payload.get("pred")
    truth = payload.get("truth")
    mask = payload.get("mask")
    if not all(isinstance(x, list) and x for x in (pred, truth, mask)):
        raise AdapterError("loss needs nonempty pred, truth and mask arrays")
    if not len(pred) == len(truth) == len(mask):
        raise AdapterError("pred, truth and mask must share a length")
    try:
        p = np.asarray(pred, dtype=np.float64)
        t = np.asarray(truth, dtype=np.float64)
    except (TypeError, ValueError):
        raise AdapterError("pred and truth must be numbers") from None
    hidden = np.asarray(mask, dtype=np.uint8) == 0
    if not hidden.any():
        raise AdapterError("loss mask hides no positions")
    err = p[hidden] - t[hidden]
    return float(np.mean(err * err))


class BridgeServer:
    def __init__(self, adapter, stdin=None, stdout=None):
        self.adapter = adapter
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout = stdout if stdout is not None else sys.stdout

    def _send(self, line: str) -> None:
        self.stdout.write(line + "\n")
        self.stdout.flush()

    def _dispatch(self, msg: dict) -> tuple[str, bool]:
        rid, kind, payload = msg["id"], msg["kind"], msg["payload"]
        if kind == "shutdown":
            return ok_reply(rid), True
        if kind == "fit":
            self.adapter.fit(payload.get("windows"))
            return ok_reply(rid), False
        if kind == "impute":
            rows = self.adapter.impute(payload.get("windows"))
            return result_reply(rid, {"windows": [{"values": r} for r in rows]}), False
        # parse_request admits only the four request kinds, so this is loss
        return result_reply(rid, {"loss": _mse(payload)}), False

    def serve(self) -> int:
        """Run until shutdown or EOF; the exit code is the return value."""
        for raw in self.stdin:
            if not raw.strip():
                continue
            try:
                msg = parse_request(raw)
            except (ValueError, ProtocolError) as exc:
                self._send(error_reply(_frame_id(raw), f"bad request: {exc}"))
                continue
            try:
                reply, stop = self._dispatch(msg)
            except (AdapterError, ProtocolError) as exc:
                self._send(error_reply(msg["id"], str(exc)))
                continue
            except Exception as exc:  # noqa: BLE001 - report, then fail loudly
                self._send(error_reply(msg["id"], f"internal error: {exc}"))
                return 1
            self._send(reply)
            if stop:
                return 0
        return 0
