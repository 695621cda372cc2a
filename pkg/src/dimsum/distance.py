"""Dynamic time warping between windows with missing values.

Cell cost is 0 whenever either endpoint is missing, and cells where either
endpoint is missing only admit the diagonal predecessor (synchronized
advancement through missing runs). The raw alignment cost is then scaled by
(n_x + n_y)/(obs_x + obs_y) >= 1 so sparser windows are not spuriously close.

The DP kernel is JIT-compiled when numba is installed; the pure-Python
fallback is the same function body, so results are identical either way.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, SeriesWindow

log = logging.getLogger(__name__)


def _dtw_table_impl(
    xv: np.ndarray, xm: np.ndarray, yv: np.ndarray, ym: np.ndarray
) -> np.ndarray:
    n = xv.shape[0]
    m = yv.shape[0]
    table = np.full((n + 1, m + 1), np.inf)
    table[0, 0] = 0.0
    for i in range(1, n + 1):
        xi_obs = xm[i - 1] != 0
        for j in range(1, m + 1):
            both = xi_obs and ym[j - 1] != 0
            if both:
                d = xv[i - 1] - yv[j - 1]
                cost = d * d
                best = table[i - 1, j - 1]
                if table[i - 1, j] < best:
                    best = table[i - 1, j]
                if table[i, j - 1] < best:
                    best = table[i, j - 1]
            else:
                cost = 0.0
                best = table[i - 1, j - 1]
            table[i, j] = cost + best
    return table


try:  # optional acceleration; semantics identical to the fallback
    from numba import njit

    _dtw_table = njit(cache=True)(_dtw_table_impl)
except ImportError:  # pragma: no cover - exercised on numba-free installs
    _dtw_table = _dtw_table_impl


@dataclass(frozen=True)
class DtwResult:
    """Alignment cost before and after the observable-ratio correction."""

    raw_cost: float
    correction: float
    corrected: float
    path_length: int

    def __post_init__(self):
        if self.correction < 1.0 - 1e-12:
            raise ContractViolation("correction factor must be >= 1")


def _path_length(table: np.ndarray, xm: np.ndarray, ym: np.ndarray) -> int:
    """Walk the optimal path back from the terminal cell; diagonal wins ties."""
    i, j = table.shape[0] - 1, table.shape[1] - 1
    steps = 0
    while i > 0 or j > 0:
        steps += 1
        if i == 0:
            j -= 1
            continue
        if j == 0:
            i -= 1
            continue
        if xm[i - 1] == 0 or ym[j - 1] == 0:
            i -= 1
            j -= 1
            continue
        diag, up, left = table[i - 1, j - 1], table[i - 1, j], table[i, j - 1]
        if diag <= up and diag <= left:
            i -= 1
            j -= 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
    return steps


def _dtw_arrays(
    xv: np.ndarray, xm: np.ndarray, yv: np.ndarray, ym: np.ndarray
) -> DtwResult:
    obs_x = int(np.count_nonzero(xm))
    obs_y = int(np.count_nonzero(ym))
    if obs_x == 0 or obs_y == 0:
        raise ContractViolation("dtw requires at least one observed value per window")
    # mask-branched kernel must never see the sentinel in arithmetic
    xv = np.where(xm != 0, xv, 0.0).astype(np.float64)
    yv = np.where(ym != 0, yv, 0.0).astype(np.float64)
    table = _dtw_table(xv, xm.astype(np.uint8), yv, ym.astype(np.uint8))
    raw = float(table[-1, -1])
    if not np.isfinite(raw):
        raise ContractViolation(
            "no admissible warping path (missing runs of unequal-length windows)"
        )
    correction = (xv.size + yv.size) / (obs_x + obs_y)
    return DtwResult(raw, correction, raw * correction, _path_length(table, xm, ym))


def dtw_arow(x: SeriesWindow, y: SeriesWindow) -> DtwResult:
    """Corrected alignment distance between two windows with missing values."""
    return _dtw_arrays(x.values, x.mask, y.values, y.mask)


def dtw_arow_to_centroid(x: SeriesWindow, centroid: np.ndarray) -> float:
    """Corrected distance to a fully observed centroid vector."""
    c = np.asarray(centroid, dtype=np.float64)
    if c.ndim != 1:
        raise ContractViolation("centroid must be a vector")
    if not np.isfinite(c).all():
        raise ContractViolation("centroid must be fully observed")
    ones = np.ones(c.size, dtype=np.uint8)
    return _dtw_arrays(x.values, x.mask, c, ones).corrected
