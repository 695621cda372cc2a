"""Tumbling-window partitioning, complete/incomplete split, and per-window
z-score normalization."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, MISSING, RawSeries, SeriesWindow

log = logging.getLogger(__name__)

# Below this population variance a window is treated as constant.
ZERO_VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class WindowedCorpus:
    """All windows of a corpus split into complete (all observed) and
    incomplete (at least one missing slot) sets.

    ``sigma_data`` is the population std over every observed slot of every
    emitted window, on the scale the windows carry (raw at partition time;
    about 1.0 once windows are normalized).
    """

    complete: tuple[SeriesWindow, ...]
    incomplete: tuple[SeriesWindow, ...]
    w: int
    sigma_data: float

    @property
    def total(self) -> int:
        return len(self.complete) + len(self.incomplete)


def partition(series: list[RawSeries], w: int) -> WindowedCorpus:
    """Split each series into consecutive non-overlapping windows of length w.

    Each series of length n contributes floor(n/w) windows; the trailing
    remainder is dropped. Windows keep raw values, so concatenating a series'
    windows reconstructs its prefix exactly.
    """
    if w < 2:
        raise ContractViolation("window length w must be at least 2")
    complete: list[SeriesWindow] = []
    incomplete: list[SeriesWindow] = []
    observed_acc: list[np.ndarray] = []
    for s in sorted(series, key=lambda s: s.series_id):
        n_windows = len(s) // w
        if n_windows == 0:
            log.warning(
                "series %s shorter than w=%d (%d slots); contributes no windows",
                s.series_id,
                w,
                len(s),
            )
            continue
        for idx in range(n_windows):
            chunk = s.values[idx * w : (idx + 1) * w]
            win = SeriesWindow.create(s.series_id, idx, chunk)
            (complete if win.is_complete else incomplete).append(win)
            if win.observed_values.size:
                observed_acc.append(win.observed_values)
    if observed_acc:
        pooled = np.concatenate(observed_acc)
        sigma = float(pooled.std())
    else:
        sigma = 0.0
    return WindowedCorpus(tuple(complete), tuple(incomplete), w, sigma)


def zscore(window: SeriesWindow) -> SeriesWindow:
    """Normalize a window to mean 0 and std 1 over its observed positions.

    Uses population std. Zero-variance windows map to all zeros (logged).
    Idempotent up to floating tolerance.
    """
    obs = window.mask == 1
    observed = window.values[obs]
    if observed.size == 0:
        raise ContractViolation(f"window {window.key} has no observed values")
    mean = float(observed.mean())
    var = float(((observed - mean) ** 2).mean())
    values = np.full(window.w, MISSING)
    if var < ZERO_VARIANCE_EPS:
        log.debug("window %s has zero variance; normalized to zeros", window.key)
        values[obs] = 0.0
    else:
        values[obs] = (observed - mean) / np.sqrt(var)
    return SeriesWindow(
        window.series_id, window.window_index, values, window.mask, normalized=True
    )


def normalize_corpus(corpus: WindowedCorpus) -> WindowedCorpus:
    """z-score every window; recompute sigma_data on the normalized scale."""
    complete = tuple(zscore(w) for w in corpus.complete)
    incomplete = tuple(zscore(w) for w in corpus.incomplete)
    acc = [w.observed_values for w in complete + incomplete if w.observed_values.size]
    sigma = float(np.concatenate(acc).std()) if acc else 0.0
    return WindowedCorpus(complete, incomplete, corpus.w, sigma)
