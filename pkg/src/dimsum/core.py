"""Domain types, mask algebra, and deterministic RNG seeding shared by every
other module.

Conventions used throughout the package:

* A mask is a binary vector where 1 means observed and 0 means missing.
* Missing value slots carry NaN as a sentinel; numeric kernels must branch on
  the mask and never on the sentinel itself (tests enforce this with a poison
  value planted at masked slots).
* All randomness flows from a single run seed through ``derive_rng`` so that
  any module can draw an independent, reproducible stream keyed by what it is
  doing rather than by when it runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# Sentinel stored at missing slots. Kernels never read it.
MISSING = float("nan")

# Value tests plant at masked slots to prove kernels never touch them.
DEBUG_POISON = 1e300

DEFAULT_WINDOW = 96


class ContractViolation(ValueError):
    """An operation was invoked outside its documented contract."""


class ConfigError(ValueError):
    """User-supplied configuration is invalid."""


# ---------------------------------------------------------------------------
# deterministic RNG derivation


def _key_words(key) -> tuple[int, int]:
    """Map one key (int or string-able) to two 32-bit words."""
    if isinstance(key, (bool, float)):
        # floats/bools as keys are almost always a bug upstream
        raise ContractViolation(f"rng key must be int or str, got {type(key).__name__}")
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if k < 0:
            raise ContractViolation("integer rng keys must be nonnegative")
        return (k & 0xFFFFFFFF, (k >> 32) & 0xFFFFFFFF)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return (
        int.from_bytes(digest[0:4], "little"),
        int.from_bytes(digest[4:8], "little"),
    )


def derive_rng(seed, *keys) -> np.random.Generator:
    """Derive an independent generator from a run seed and a key path.

    The same (seed, keys) always yields the same stream; distinct key paths
    yield statistically independent streams. Keys may be ints or strings.
    """
    words: list[int] = []
    for key in keys:
        words.extend(_key_words(key))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(words))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RunSeed:
    """A 64-bit unsigned run seed; identical seed + input means identical artifacts."""

    seed: int

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("seed must be an integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "seed", int(self.seed))

    def __int__(self) -> int:
        return self.seed


def _as_mask_array(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ContractViolation("mask must be one-dimensional")
    if arr.size == 0:
        raise ContractViolation("mask must be non-empty")
    if not np.isin(arr, (0, 1)).all():
        raise ContractViolation("mask entries must be 0 or 1")
    out = arr.astype(np.uint8)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MaskVector:
    """Binary missing-pattern vector: 1 = observed, 0 = missing."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_mask_array(self.bits))

    @classmethod
    def ones(cls, w: int) -> "MaskVector":
        return cls(np.ones(w, dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def missing_rate(self) -> float:
        return float(np.count_nonzero(self.bits == 0)) / self.bits.size

    @property
    def all_observed(self) -> bool:
        return bool(self.bits.all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskVector):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            (self.bits == other.bits).all()
        )

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True)
class RawSeries:
    """A fixed-interval series; missing slots hold NaN.

    Slots are implicit: slot i corresponds to time start + i * interval, so no
    per-slot timestamps are stored.
    """

    series_id: str
    interval: float
    start: float
    values: np.ndarray

    def __post_init__(self):
        if float(self.interval) <= 0:
            raise ConfigError("interval must be positive")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ContractViolation("series values must be one-dimensional")
        if np.isinf(arr).any():
            raise ContractViolation("series values must be finite or missing")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "interval", float(self.interval))
        object.__setattr__(self, "start", float(self.start))

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SeriesWindow:
    """One fixed-length window of a series plus its mask.

    The raw constructor only validates; it deliberately permits arbitrary
    garbage at masked slots so tests can plant poison there. Use ``create``
    to build sanitized windows with NaN at every masked slot.
    """

    series_id: str
    window_index: int
    values: np.ndarray
    mask: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        mask = _as_mask_array(self.mask)
        values = np.asarray(self.values, dtype=np.float64).copy()
        if values.ndim != 1 or values.size != mask.size:
            raise ContractViolation("values and mask must be 1-d and equal length")
        observed = values[mask == 1]
        if observed.size and not np.isfinite(observed).all():
            raise ContractViolation("observed positions must hold finite values")
        if self.window_index < 0:
            raise ContractViolation("window_index must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def create(
        cls,
        series_id: str,
        window_index: int,
        values,
        mask=None,
        normalized: bool = False,
    ) -> "SeriesWindow":
        """Build a window, deriving the mask from NaNs when absent and
        forcing the sentinel at every masked slot."""
        vals = np.asarray(values, dtype=np.float64).copy()
        if mask is None:
            bits = np.isfinite(vals).astype(np.uint8)
        else:
            bits = _as_mask_array(mask)
            if bits.size != vals.size:
                raise ContractViolation("values and mask must be equal length")
        vals[bits == 0] = MISSING
        return cls(series_id, window_index, vals, bits, normalized)

    @property
    def w(self) -> int:
        return int(self.values.size)

    @property
    def key(self) -> str:
        return f"{self.series_id}:{self.window_index}"

    @property
    def is_complete(self) -> bool:
        return bool(self.mask.all())

    @property
    def mask_vector(self) -> MaskVector:
        return MaskVector(self.mask)

    @property
    def observed_values(self) -> np.ndarray:
        return self.values[self.mask == 1]

    @property
    def missing_rate(self) -> float:
        return float(np.count_nonzero(self.mask == 0)) / self.w


@dataclass(frozen=True)
class PacConfig:
    """Sample-bound and validation parameters for the learning guarantee."""

    epsilon: float = 0.03
    delta: float = 0.1
    tau_frac: float = 0.1
    gamma_min: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie strictly in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie strictly in (0, 1)")
        if not self.tau_frac > 0.0:
            raise ConfigError("tau_frac must be positive")
        if not 0.0 < self.gamma_min < 1.0:
            raise ConfigError("gamma_min must lie strictly in (0, 1)")


# ---------------------------------------------------------------------------
# mask algebra


def mask_and(a: MaskVector, b: MaskVector) -> MaskVector:
    """Bitwise AND of two masks; a position survives only if observed in both."""
    if len(a) != len(b):
        raise ContractViolation(f"mask length mismatch: {len(a)} vs {len(b)}")
    return MaskVector(a.bits & b.bits)


def apply_mask(window: SeriesWindow, m: MaskVector) -> SeriesWindow:
    """Hide additional positions of a window.

    The result's mask is ``mask_and(window.mask, m)``; values survive at
    positions observed in both, newly hidden slots carry the sentinel. The
    caller keeps the original window when ground truth is needed.
    """
    combined = mask_and(window.mask_vector, m)
    values = np.where(combined.bits == 1, window.values, MISSING)
    return SeriesWindow(
        window.series_id, window.window_index, values, combined.bits, window.normalized
    )
