"""Client half of the external-imputer protocol.

Runs the configured command as a child process and speaks line-delimited
JSON over its stdio: one request object per line, one response per request,
with ids echoed back. The child owns the model; this side enforces the
imputer contract (visible pass-through, finite outputs) on whatever comes
back, so a misbehaving server cannot corrupt the pipeline silently.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess

import numpy as np

from .core import ConfigError, ContractViolation
from .imputers import Imputer, NotFittedError, _as_window

log = logging.getLogger(__name__)

DEFAULT_BATCH = 64
SHUTDOWN_GRACE = 5.0


def _window_payload(values: np.ndarray, mask: np.ndarray) -> dict:
    # hidden slots never cross the wire; the server sees null there
    vals = [float(v) if b == 1 else None for v, b in zip(values, mask)]
    return {"values": vals, "mask": [int(b) for b in mask]}


class BridgeImputer(Imputer):
    """Imputer backed by an external process launched from a command line."""

    name = "bridge"

    def __init__(self, command: str, batch_size: int = DEFAULT_BATCH):
        super().__init__()
        if not command or not command.strip():
            raise ConfigError("bridge imputer needs a command line")
        if batch_size < 1:
            raise ConfigError("bridge batch size must be at least 1")
        self.command = command
        self.batch_size = int(batch_size)
        self._proc: subprocess.Popen | None = None
        self._next_id = 0

    # -- process plumbing ---------------------------------------------------

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except FileNotFoundError as exc:
                raise ConfigError(f"bridge command not found: {exc.filename!r}") from None
        elif self._proc.poll() is not None:
            raise ContractViolation(
                f"bridge process already exited with code {self._proc.returncode}"
            )
        return self._proc

    def _request(self, kind: str, payload: dict) -> dict:
        proc = self._ensure_proc()
        self._next_id += 1
        rid = self._next_id
        line = json.dumps({"id": rid, "kind": kind, "payload": payload}, separators=(",", ":"))
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError):
            reply = ""
        if not reply:
            raise ContractViolation(
                f"bridge process stopped responding (exit code {proc.poll()})"
            )
        try:
            msg = json.loads(reply)
        except json.JSONDecodeError:
            raise ContractViolation(f"bridge sent a malformed reply: {reply!r}") from None
        if msg.get("id") != rid:
            raise ContractViolation(
                f"bridge reply id {msg.get('id')!r} does not match request id {rid}"
            )
        if msg.get("kind") == "error":
            detail = msg.get("payload", {}).get("message", "no detail")
            raise ContractViolation(f"bridge error: {detail}")
        return msg.get("payload", {})

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        if proc.poll() is None:
            try:
                self._request("shutdown", {})
            except ContractViolation:
                pass
            try:
                proc.wait(timeout=SHUTDOWN_GRACE)
            except subprocess.TimeoutExpired:
                log.warning("bridge process ignored shutdown; killing it")
                proc.kill()
                proc.wait()
        for pipe in (proc.stdin, proc.stdout):
            if pipe is not None:
                pipe.close()
        self._proc = None

    def __enter__(self) -> "BridgeImputer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # -- imputer contract ---------------------------------------------------

    def _fit(self, v: np.ndarray, m: np.ndarray) -> None:
        windows = [_window_payload(v[i], m[i]) for i in range(v.shape[0])]
        self._request("fit", {"windows": windows})

    def _impute_rows(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        windows = [_window_payload(v[i], m[i]) for i in range(v.shape[0])]
        reply = self._request("impute", {"windows": windows})
        rows = reply.get("windows")
        if not isinstance(rows, list) or len(rows) != v.shape[0]:
            raise ContractViolation("bridge impute reply has the wrong number of windows")
        out = np.empty(v.shape, dtype=np.float64)
        for i, row in enumerate(rows):
            vals = np.asarray(row.get("values", None), dtype=np.float64)
            if vals.shape != (v.shape[1],):
                raise ContractViolation("bridge impute reply window has the wrong length")
            out[i] = vals
        return out

    def _fill(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        return self._impute_rows(v[None, :], m[None, :])[0]

    def impute_batch(self, values, masks) -> np.ndarray:
        """Chunked batch imputation: one request per ``batch_size`` windows."""
        if not self._fitted:
            raise NotFittedError("bridge imputer used before fit")
        v_in = np.asarray(values, dtype=np.float64)
        m_in = np.asarray(masks, dtype=np.uint8)
        if v_in.ndim != 2 or v_in.shape != m_in.shape:
            raise ContractViolation("batch values and masks must be matching 2-d arrays")
        cleaned = [_as_window(v_in[i], m_in[i]) for i in range(v_in.shape[0])]
        v = np.stack([c[0] for c in cleaned])
        m = np.stack([c[1] for c in cleaned])
        out = np.empty_like(v)
        for lo in range(0, v.shape[0], self.batch_size):
            hi = min(lo + self.batch_size, v.shape[0])
            filled = self._impute_rows(v[lo:hi], m[lo:hi])
            out[lo:hi] = np.where(m[lo:hi] == 1, v[lo:hi], filled)
        if not np.isfinite(out).all():
            raise ContractViolation("bridge produced non-finite imputations")
        return out

    def remote_loss(self, pred, truth, mask) -> float:
        """Ask the server to score predictions at the hidden slots."""
        p = np.asarray(pred, dtype=np.float64)
        t = np.asarray(truth, dtype=np.float64)
        m = np.asarray(mask, dtype=np.uint8)
        if not p.shape == t.shape == m.shape or p.ndim != 1:
            raise ContractViolation("loss expects one window: pred, truth, mask")
        payload = {
            "pred": [float(x) for x in p],
            "truth": [float(x) for x in t],
            "mask": [int(b) for b in m],
        }
        reply = self._request("loss", payload)
        if "loss" not in reply:
            raise ContractViolation("bridge loss reply carries no loss")
        return float(reply["loss"])

    def _state(self) -> dict:
        return {"command": self.command, "batch_size": self.batch_size}
