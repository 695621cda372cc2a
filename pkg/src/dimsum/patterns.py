"""Missing-pattern projection onto complete windows, KL-based structure
analysis for cluster acceptance, and construction of the three training
representations (projected, artificially masked, and combined)."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    ContractViolation,
    MISSING,
    MaskVector,
    SeriesWindow,
    derive_rng,
    mask_and,
)

log = logging.getLogger(__name__)

# Laplace smoothing for mask-position distributions.
KL_SMOOTHING = 1e-3

# A cluster is kept when more than this fraction of its patterns look more
# like each other than like rate-matched noise.
OMEGA_STRUCT = 2.0 / 3.0


@dataclass(frozen=True)
class ProjectedSample:
    """A complete window carrying a (possibly borrowed) missing pattern.

    ``proj_mask`` is copied verbatim from the source incomplete window, so
    every hidden position has known ground truth. ``source_id`` is None for
    filler rows whose projection mask is all-ones (targets left unpaired when
    a cluster has fewer patterns than complete windows).
    """

    source_id: str | None
    target_id: str
    ground_truth: np.ndarray
    proj_mask: MaskVector
    art_mask: MaskVector | None = None

    def __post_init__(self):
        truth = np.asarray(self.ground_truth, dtype=np.float64).copy()
        if truth.ndim != 1 or not np.isfinite(truth).all():
            raise ContractViolation("ground truth must be a complete finite vector")
        if len(self.proj_mask) != truth.size:
            raise ContractViolation("projection mask length must match the window")
        if self.art_mask is not None and len(self.art_mask) != truth.size:
            raise ContractViolation("artificial mask length must match the window")
        truth.setflags(write=False)
        object.__setattr__(self, "ground_truth", truth)

    @property
    def w(self) -> int:
        return int(self.ground_truth.size)

    @property
    def combined_mask(self) -> MaskVector:
        if self.art_mask is None:
            return self.proj_mask
        return mask_and(self.proj_mask, self.art_mask)


@dataclass(frozen=True)
class StructureReport:
    """Outcome of the pattern-structure test for one cluster."""

    n_pattern: int
    total: int
    ratio: float
    accepted: bool
    reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "n_pattern": self.n_pattern,
            "total": self.total,
            "ratio": self.ratio,
            "accepted": self.accepted,
            "reason": self.reason,
        }


def project(incomplete: SeriesWindow, complete: SeriesWindow) -> ProjectedSample:
    """Copy the incomplete window's mask onto a complete window."""
    if not complete.is_complete:
        raise ContractViolation(f"projection target {complete.key} is not complete")
    if incomplete.w != complete.w:
        raise ContractViolation("window lengths must match for projection")
    return ProjectedSample(
        source_id=incomplete.key,
        target_id=complete.key,
        ground_truth=complete.values,
        proj_mask=incomplete.mask_vector,
    )


def mask_kl(p: MaskVector, q: MaskVector) -> float:
    """KL divergence between the missingness-position distributions of two
    masks, Laplace-smoothed so it is always finite and nonnegative."""
    if len(p) != len(q):
        raise ContractViolation("mask length mismatch")
    w = len(p)
    zp = (p.bits == 0).astype(np.float64)
    zq = (q.bits == 0).astype(np.float64)
    dp = (zp + KL_SMOOTHING) / (zp.sum() + w * KL_SMOOTHING)
    dq = (zq + KL_SMOOTHING) / (zq.sum() + w * KL_SMOOTHING)
    # true KL is nonnegative; the clamp only absorbs float rounding near 0
    return max(0.0, float(np.sum(dp * np.log(dp / dq))))


def structure_test(masks: dict[str, MaskVector], seed: int) -> StructureReport:
    """Decide whether a cluster's missing patterns are structured.

    For each source pattern, one peer pattern and one rate-matched iid mask
    are drawn from a stream keyed by the source's id (so the outcome does not
    depend on dict ordering); the source scores a point when it diverges less
    from the peer than from the noise. The cluster is accepted when the score
    ratio exceeds two thirds; singleton clusters auto-reject.
    """
    total = len(masks)
    if total < 2:
        return StructureReport(0, total, 0.0, False, reason="fewer than 2 patterns")
    keys = sorted(masks)
    n_pattern = 0
    for src_key in keys:
        src = masks[src_key]
        rng = derive_rng(seed, "structure", src_key)
        others = [k for k in keys if k != src_key]
        peer = masks[others[int(rng.integers(len(others)))]]
        rand_bits = (rng.random(len(src)) >= src.missing_rate).astype(np.uint8)
        rand = MaskVector(rand_bits)
        if mask_kl(src, peer) < mask_kl(src, rand):
            n_pattern += 1
    ratio = n_pattern / total
    return StructureReport(n_pattern, total, ratio, ratio > OMEGA_STRUCT)


def pair_projections(
    targets: list[SeriesWindow], patterns: dict[str, MaskVector], seed: int
) -> tuple[list[ProjectedSample], int]:
    """Assign each incomplete pattern to one uniformly chosen complete target.

    The pairing walks a seeded permutation of the targets, recycling it only
    when patterns outnumber targets (the recycle count is returned). Leftover
    targets become filler samples with an all-ones projection mask, so every
    complete window contributes exactly one training row when patterns are
    scarce and each pattern contributes one row when they are plentiful.
    """
    if not targets:
        raise ContractViolation("cluster has no complete windows to project onto")
    for t in targets:
        if not t.is_complete:
            raise ContractViolation(f"projection target {t.key} is not complete")
    rng = derive_rng(seed, "pairing")
    perm = rng.permutation(len(targets))
    pattern_keys = sorted(patterns)
    n_t = len(targets)
    samples: list[ProjectedSample] = []
    for i, pkey in enumerate(pattern_keys):
        tgt = targets[int(perm[i % n_t])]
        samples.append(
            ProjectedSample(
                source_id=pkey,
                target_id=tgt.key,
                ground_truth=tgt.values,
                proj_mask=patterns[pkey],
            )
        )
    for j in range(len(pattern_keys), n_t):
        tgt = targets[int(perm[j])]
        samples.append(
            ProjectedSample(
                source_id=None,
                target_id=tgt.key,
                ground_truth=tgt.values,
                proj_mask=MaskVector.ones(tgt.w),
            )
        )
    recycled = max(0, len(pattern_keys) - n_t)
    return samples, recycled


@dataclass(frozen=True)
class TrainingSet:
    """Matrix view of one training representation: values carry NaN at
    hidden slots, mask marks them, truth retains every ground-truth value."""

    values: np.ndarray  # (n, w)
    mask: np.ndarray  # (n, w) uint8
    truth: np.ndarray  # (n, w)
    pairs: tuple[tuple[str | None, str], ...]

    def __len__(self) -> int:
        return int(self.truth.shape[0])


def _training_set(samples: list[ProjectedSample], masks: list[MaskVector]) -> TrainingSet:
    truth = np.stack([s.ground_truth for s in samples])
    bits = np.stack([m.bits for m in masks])
    values = np.where(bits == 1, truth, MISSING)
    pairs = tuple((s.source_id, s.target_id) for s in samples)
    return TrainingSet(values, bits, truth, pairs)


def build_training_sets(
    samples: list[ProjectedSample], mask_gen
) -> tuple[TrainingSet, TrainingSet, TrainingSet]:
    """Build the projected, artificial-only, and combined training sets.

    ``mask_gen(index, sample)`` supplies the artificial mask for each row;
    the same artificial mask is used in the artificial-only and combined
    representations, so the AND identities hold row for row.
    """
    if not samples:
        raise ContractViolation("no samples to build training sets from")
    proj_masks = [s.proj_mask for s in samples]
    art_masks = [mask_gen(i, s) for i, s in enumerate(samples)]
    for m in art_masks:
        if len(m) != samples[0].w:
            raise ContractViolation("artificial mask length mismatch")
    combined = [mask_and(p, a) for p, a in zip(proj_masks, art_masks)]
    d_proj = _training_set(samples, proj_masks)
    d_mask = _training_set(samples, art_masks)
    d_proj_mask = _training_set(samples, combined)
    return d_proj, d_mask, d_proj_mask


def bernoulli_mask_gen(rate: float, seed: int, tag: str):
    """Artificial-mask generator: iid hiding at ``rate``, keyed by the sample
    identity so results do not depend on row order. At least one position
    always stays visible so rate 1.0 stays trainable."""
    if not 0.0 <= rate <= 1.0:
        raise ContractViolation("mask rate must lie in [0, 1]")

    def gen(index: int, sample: ProjectedSample) -> MaskVector:
        rng = derive_rng(seed, "artmask", tag, sample.source_id or "-", sample.target_id)
        u = rng.random(sample.w)
        bits = (u >= rate).astype(np.uint8)
        if not bits.any():
            bits[int(np.argmax(u))] = 1
        return MaskVector(bits)

    return gen
