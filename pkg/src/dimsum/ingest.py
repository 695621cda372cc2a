"""Load raw readings from files, align them to a fixed-interval grid (absent
timestamps become missing slots), and generate synthetic corpora with
controlled missingness for benchmarks."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    ContractViolation,
    MISSING,
    RawSeries,
    SeriesWindow,
    apply_mask,
    derive_rng,
    MaskVector,
)

log = logging.getLogger(__name__)

MNAR_RULES = ("top-value", "burst")
# Mean burst run length is 1/BURST_P positions.
BURST_P = 0.125


@dataclass(frozen=True)
class IngestSpec:
    """Where and how to read raw readings.

    Timestamps are UTC epoch seconds. ``clamp`` optionally drops readings
    outside [lo, hi] as sensor glitches. ``fail_fast`` decides whether an
    unparseable row aborts the load or is skipped with a warning.
    """

    paths: tuple[str, ...]
    fmt: str = "csv"
    interval: float = 900.0
    clamp: tuple[float, float] | None = None
    fail_fast: bool = True

    def __post_init__(self):
        if self.fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown format {self.fmt!r} (expected csv or jsonl)")
        if not self.interval > 0:
            raise ConfigError("interval must be positive")
        if self.clamp is not None and self.clamp[0] > self.clamp[1]:
            raise ConfigError("clamp range must satisfy lo <= hi")
        object.__setattr__(self, "paths", tuple(self.paths))


CSV_HEADER = ["series_id", "timestamp", "value"]


def _iter_rows(path: str, fmt: str, fail_fast: bool):
    """Yield (series_id, t, v) per parsed row; v is None for an explicit
    missing marker (empty CSV value / JSON null), which anchors the slot on
    the time grid without providing a reading. A malformed row either aborts
    (fail_fast) or is skipped with a warning; either way the message carries
    the file and line number."""

    def bad(msg: str):
        if fail_fast:
            raise ConfigError(msg)
        log.warning("skipping row: %s", msg)

    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ConfigError(f"{path}: empty file, expected header")
            if [h.strip() for h in header] != CSV_HEADER:
                raise ConfigError(
                    f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    bad(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
                    continue
                try:
                    raw = row[2].strip()
                    yield row[0], float(row[1]), (None if raw == "" else float(raw))
                except ValueError:
                    bad(f"{path}:{lineno}: unparseable row {row!r}")
    else:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    v = obj["v"]
                    yield str(obj["id"]), float(obj["t"]), (None if v is None else float(v))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    bad(f"{path}:{lineno}: unparseable row {line!r}")


def load_series(spec: IngestSpec) -> list[RawSeries]:
    """Read all files and align readings to the interval grid.

    A reading at time t maps to slot round-half-up((t - start)/interval)
    where start is the series' earliest timestamp; slots without a reading
    are missing. An explicit missing marker (None value) anchors its slot on
    the grid without a reading, so leading or trailing gaps survive a round
    trip. A duplicate slot keeps the last reading (warning logged).
    """
    readings: dict[str, list[tuple[float, float | None]]] = {}
    dropped = 0
    for path in spec.paths:
        for sid, t, v in _iter_rows(path, spec.fmt, spec.fail_fast):
            if not math.isfinite(t) or (v is not None and not math.isfinite(v)):
                if spec.fail_fast:
                    raise ConfigError(f"{path}: non-finite reading for {sid!r}")
                log.warning("skipping non-finite reading for %s", sid)
                continue
            if (
                spec.clamp is not None
                and v is not None
                and not (spec.clamp[0] <= v <= spec.clamp[1])
            ):
                dropped += 1
                continue
            readings.setdefault(sid, []).append((t, v))
    if dropped:
        log.warning("clamp range dropped %d readings", dropped)

    out: list[RawSeries] = []
    for sid in sorted(readings):
        rows = readings[sid]
        start = min(t for t, _ in rows)
        slots = [math.floor((t - start) / spec.interval + 0.5) for t, _ in rows]
        n = max(slots) + 1
        values = np.full(n, MISSING)
        seen = np.zeros(n, dtype=bool)
        for slot, (_, v) in zip(slots, rows):
            if seen[slot]:
                log.warning("series %s: duplicate reading for slot %d, keeping last", sid, slot)
            values[slot] = MISSING if v is None else v
            seen[slot] = True
        out.append(RawSeries(sid, spec.interval, start, values))
    return out


# ---------------------------------------------------------------------------
# missingness generators


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate < 1.0:
        raise ContractViolation("rate must lie in [0, 1)")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def gen_mcar(windows: list[SeriesWindow], rate: float, seed: int) -> list[SeriesWindow]:
    """Hide each position independently with probability ``rate``.

    Masks are drawn per window from a stream keyed by the window identity,
    so results do not depend on list order, and compose with any existing
    missingness through mask AND.
    """
    _check_rate(rate)
    if rate == 0.0:
        return list(windows)
    out = []
    for win in windows:
        rng = derive_rng(seed, "mcar", win.key)
        bits = (rng.random(win.w) >= rate).astype(np.uint8)
        out.append(apply_mask(win, MaskVector(bits)))
    return out


def _mnar_top_mask(values: np.ndarray, observed: np.ndarray, rate: float) -> np.ndarray:
    """Hide the round-half-up(rate*w) highest-magnitude observed values
    (ties resolved toward the lowest index)."""
    w = values.size
    n_hide = min(_round_half_up(rate * w), int(observed.sum()))
    bits = np.ones(w, dtype=np.uint8)
    if n_hide == 0:
        return bits
    mag = np.where(observed, np.abs(values), -np.inf)
    order = np.argsort(-mag, kind="stable")
    bits[order[:n_hide]] = 0
    return bits


def _mnar_burst_mask(
    values: np.ndarray, observed: np.ndarray, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Hide contiguous runs seeded at the highest-magnitude remaining value;
    run lengths are geometric with mean 1/BURST_P, truncated to the budget."""
    w = values.size
    budget = min(_round_half_up(rate * w), int(observed.sum()))
    bits = np.ones(w, dtype=np.uint8)
    visible = observed.copy()
    while budget > 0 and visible.any():
        mag = np.where(visible, np.abs(values), -np.inf)
        seed_pos = int(np.argmax(mag))
        run = min(int(rng.geometric(BURST_P)), budget)
        for pos in range(seed_pos, min(seed_pos + run, w)):
            if visible[pos]:
                bits[pos] = 0
                visible[pos] = False
                budget -= 1
                if budget == 0:
                    break
    return bits


def gen_mnar(
    windows: list[SeriesWindow], rate: float, rule: str, seed: int
) -> list[SeriesWindow]:
    """Value-dependent missingness: either hide the highest-magnitude values
    ("top-value") or contiguous runs seeded at high values ("burst")."""
    _check_rate(rate)
    if rule not in MNAR_RULES:
        raise ConfigError(f"unknown MNAR rule {rule!r} (expected one of {MNAR_RULES})")
    if rate == 0.0:
        return list(windows)
    out = []
    for win in windows:
        observed = win.mask == 1
        if rule == "top-value":
            bits = _mnar_top_mask(win.values, observed, rate)
        else:
            rng = derive_rng(seed, "mnar-burst", win.key)
            bits = _mnar_burst_mask(win.values, observed, rate, rng)
        out.append(apply_mask(win, MaskVector(bits)))
    return out


def blocky_mask(w: int, rate: float, run_p: float, rng: np.random.Generator) -> np.ndarray:
    """Alternating observed-gap / missing-run mask with geometric run lengths.

    Missing runs ~ geometric(run_p) (mean 1/run_p); gap lengths are geometric
    with mean chosen so the long-run missing fraction equals ``rate``.
    """
    _check_rate(rate)
    if not 0.0 < run_p <= 1.0:
        raise ConfigError("run_p must lie in (0, 1]")
    bits = np.ones(w, dtype=np.uint8)
    if rate == 0.0:
        return bits
    gap_p = min(1.0, run_p * rate / (1.0 - rate))
    pos = 0
    missing_first = rng.random() < rate
    state_missing = missing_first
    while pos < w:
        if state_missing:
            run = int(rng.geometric(run_p))
            bits[pos : pos + run] = 0
            pos += run
        else:
            pos += int(rng.geometric(gap_p))
        state_missing = not state_missing
    if not bits.any():
        bits[int(rng.integers(w))] = 1
    return bits


# ---------------------------------------------------------------------------
# synthetic corpora


@dataclass(frozen=True)
class PatternSpec:
    """One shape generator with per-series amplitude/phase jitter."""

    name: str
    kind: str  # sine | square | ramp | composite
    weight: float
    freq: float = 3.0
    amp_jitter: float = 0.1
    phase_jitter: float = 0.05  # fraction of a full cycle

    def __post_init__(self):
        if self.kind not in ("sine", "square", "ramp", "composite"):
            raise ConfigError(f"unknown pattern kind {self.kind!r}")
        if self.weight < 0:
            raise ConfigError("pattern weight must be nonnegative")


@dataclass(frozen=True)
class MissingnessSpec:
    """How incomplete windows lose values: iid (mcar), value-dependent
    (mnar-top / mnar-burst), or correlated runs (blocky)."""

    kind: str = "mcar"
    rate: float = 0.3
    run_p: float = 0.2  # blocky only: geometric run parameter

    def __post_init__(self):
        if self.kind not in ("mcar", "mnar-top", "mnar-burst", "blocky"):
            raise ConfigError(f"unknown missingness kind {self.kind!r}")
        _check_rate(self.rate)


@dataclass(frozen=True)
class SyntheticSpec:
    """A labeled synthetic corpus: each series is one window of length w."""

    n_series: int
    w: int = 96
    patterns: tuple[PatternSpec, ...] = (
        PatternSpec("sine", "sine", 1 / 3, freq=2.0),
        PatternSpec("square", "square", 1 / 3, freq=3.0),
        PatternSpec("ramp", "ramp", 1 / 3, freq=1.0),
    )
    noise_std: float = 0.05
    incomplete_fraction: float = 0.0
    missingness: MissingnessSpec | None = None
    interval: float = 900.0

    def __post_init__(self):
        if self.n_series < 1:
            raise ConfigError("n_series must be at least 1")
        if self.w < 2:
            raise ConfigError("w must be at least 2")
        if not 0.0 <= self.incomplete_fraction <= 1.0:
            raise ConfigError("incomplete_fraction must lie in [0, 1]")
        total = sum(p.weight for p in self.patterns)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"pattern weights must sum to 1, got {total}")
        if self.incomplete_fraction > 0 and self.missingness is None:
            raise ConfigError("missingness spec required when incomplete_fraction > 0")
        object.__setattr__(self, "patterns", tuple(self.patterns))


def _shape(kind: str, freq: float, phase: float, w: int) -> np.ndarray:
    t = np.arange(w) / w
    if kind == "sine":
        return np.sin(2 * np.pi * (freq * t + phase))
    if kind == "square":
        return np.where(np.sin(2 * np.pi * (freq * t + phase)) >= 0.0, 1.0, -1.0)
    if kind == "ramp":
        return 2.0 * np.mod(freq * t + phase, 1.0) - 1.0
    # composite: slow sine over a faster ramp
    return 0.6 * np.sin(2 * np.pi * (freq * t + phase)) + 0.4 * (
        2.0 * np.mod(2 * freq * t + phase, 1.0) - 1.0
    )


def _missing_bits(
    spec: MissingnessSpec, values: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    w = values.size
    observed = np.ones(w, dtype=bool)
    if spec.kind == "mcar":
        bits = (rng.random(w) >= spec.rate).astype(np.uint8)
    elif spec.kind == "mnar-top":
        bits = _mnar_top_mask(values, observed, spec.rate)
    elif spec.kind == "mnar-burst":
        bits = _mnar_burst_mask(values, observed, spec.rate, rng)
    else:
        bits = blocky_mask(w, spec.rate, spec.run_p, rng)
    if not bits.any():
        bits[int(rng.integers(w))] = 1
    return bits


def gen_synthetic(spec: SyntheticSpec, seed: int) -> tuple[list[RawSeries], dict]:
    """Generate a labeled corpus; deterministic given the seed.

    Returns (series, meta) where meta carries ground-truth pattern labels and
    the ids of series that received missingness.
    """
    cum = np.cumsum([p.weight for p in spec.patterns])
    series: list[RawSeries] = []
    labels: dict[str, str] = {}
    incomplete_ids: list[str] = []
    for i in range(spec.n_series):
        rng = derive_rng(seed, "synth", i)
        sid = f"s{i:06d}"
        pat = spec.patterns[int(np.searchsorted(cum, rng.random(), side="right"))]
        amp = 1.0 + pat.amp_jitter * rng.uniform(-1.0, 1.0)
        phase = pat.phase_jitter * rng.uniform(-1.0, 1.0)
        values = amp * _shape(pat.kind, pat.freq, phase, spec.w)
        if spec.noise_std > 0:
            values = values + spec.noise_std * rng.standard_normal(spec.w)
        if spec.incomplete_fraction > 0 and rng.random() < spec.incomplete_fraction:
            bits = _missing_bits(spec.missingness, values, rng)
            # a draw can legitimately hide nothing; record only realized gaps
            if not bits.all():
                values = np.where(bits == 1, values, MISSING)
                incomplete_ids.append(sid)
        series.append(RawSeries(sid, spec.interval, 0.0, values))
        labels[sid] = pat.name
    meta = {"labels": labels, "incomplete_ids": incomplete_ids}
    return series, meta
