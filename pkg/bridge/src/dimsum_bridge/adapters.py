"""Reference imputers served over the protocol.

The linear adapter mirrors the dimsum package's built-in interpolation
operation for operation, so a bridged run reproduces a native run bit for
bit; the zero-fill adapter is the minimal stateful example.
"""

from __future__ import annotations

import numpy as np


class AdapterError(ValueError):
    """Recoverable request problem: bad payload shape or use before fit."""


def parse_window(row, w: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One wire window -> (values with NaN at hidden, uint8 mask)."""
    if not isinstance(row, dict):
        raise AdapterError("window must be an object with values and mask")
    vals = row.get("values")
    mask = row.get("mask")
    if not isinstance(vals, list) or not isinstance(mask, list):
        raise AdapterError("window needs values and mask arrays")
    if not vals or len(vals) != len(mask):
        raise AdapterError("values and mask must be nonempty and the same length")
    if w is not None and len(vals) != w:
        raise AdapterError(f"window length {len(vals)} differs from fitted length {w}")
    if any(b not in (0, 1) for b in mask):
        raise AdapterError("mask entries must be 0 or 1")
    m = np.asarray(mask, dtype=np.uint8)
    try:
        v = np.array([np.nan if x is None else float(x) for x in vals], dtype=np.float64)
    except (TypeError, ValueError):
        raise AdapterError("values must be numbers or null") from None
    if not np.isfinite(v[m == 1]).all():
        raise AdapterError("visible values must be finite")
    return v, m


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(windows, list) or not windows:
        raise AdapterError("expected a nonempty list of windows")
    first_v, first_m = parse_window(windows[0])
    vs, ms = [first_v], [first_m]
    for row in windows[1:]:
        v, m = parse_window(row, first_v.size)
        vs.append(v)
        ms.append(m)
    return np.stack(vs), np.stack(ms)


class Adapter:
    """Stateful imputer: ``fit`` once, then ``impute`` any number of times.
    Visible positions always pass through unchanged."""

    name = "base"

    def __init__(self):
        self._fitted = False

    def fit(self, windows) -> None:
        v, m = stack_windows(windows)
        if not (m == 1).any():
            raise AdapterError("training data has no visible values")
        self._global_mean = float(np.mean(v[m == 1]))
        self._w = v.shape[1]
        self._fit(v, m)
        self._fitted = True

    def _fit(self, v: np.ndarray, m: np.ndarray) -> None:
        raise NotImplementedError

    def _fill(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def impute(self, windows) -> list[list[float]]:
        if not self._fitted:
            raise AdapterError("not fitted")
        if not isinstance(windows, list) or not windows:
            raise AdapterError("expected a nonempty list of windows")
        rows = []
        for row in windows:
            v, m = parse_window(row, self._w)
            out = np.where(m == 1, v, self._fill(v, m))
            rows.append([float(x) for x in out])
        return rows


class ZeroFillAdapter(Adapter):
    """Echo imputer: hidden positions become 0.0."""

    name = "zero"

    def _fit(self, v, m):
        pass

    def _fill(self, v, m):
        return np.zeros(v.size, dtype=np.float64)


class LinearInterpAdapter(Adapter):
    """Within-window linear interpolation with edge extrapolation along the
    line through the two outermost anchors; anchor-free windows fall back to
    the mean of the visible training values."""

    name = "linear"

    def _fit(self, v, m):
        pass

    def _fill(self, v, m):
        anchors = np.flatnonzero(m == 1)
        w = v.size
        if anchors.size == 0:
            return np.full(w, self._global_mean)
        av = v[anchors]
        if anchors.size == 1:
            return np.full(w, av[0])
        idx = np.arange(w, dtype=np.float64)
        out = np.interp(idx, anchors.astype(np.float64), av)
        first, second = anchors[0], anchors[1]
        slope = (v[second] - v[first]) / (second - first)
        out[:first] = v[first] + slope * (idx[:first] - first)
        last, prev = anchors[-1], anchors[-2]
        slope = (v[last] - v[prev]) / (last - prev)
        out[last + 1 :] = v[last] + slope * (idx[last + 1 :] - last)
        return out


ADAPTERS = {
    ZeroFillAdapter.name: ZeroFillAdapter,
    LinearInterpAdapter.name: LinearInterpAdapter,
}
