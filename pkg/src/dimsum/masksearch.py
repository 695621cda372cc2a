"""Logarithmic search for the minimum effective artificial mask rate, by
comparing a projection-trained model against an oracle trained without
projected missingness, plus final per-cluster training at the chosen rate."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, MaskVector, SeriesWindow, derive_rng
from .imputers import make_imputer, mse_loss
from .patterns import bernoulli_mask_gen, build_training_sets, pair_projections

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-9


@dataclass(frozen=True)
class MaskSearchConfig:
    m_min: float = 0.01
    growth: float = 1.0
    max_steps: int = 10
    oracle_runs: int = 5
    val_fraction: float = 0.2
    explore_full: bool = False

    def __post_init__(self):
        if not 0.0 < self.m_min <= 1.0:
            raise ContractViolation("m_min must lie in (0, 1]")
        if not self.growth > 0.0:
            raise ContractViolation("growth must be positive")
        if self.max_steps < 1:
            raise ContractViolation("max_steps must be at least 1")
        if self.oracle_runs < 2:
            raise ContractViolation("oracle_runs must be at least 2")
        if not 0.0 < self.val_fraction < 1.0:
            raise ContractViolation("val_fraction must lie in (0, 1)")


def mask_schedule(cfg: MaskSearchConfig) -> list[float]:
    """Geometric rate schedule m_min * (1+growth)^i, clamped at 1.0."""
    out: list[float] = []
    for i in range(cfg.max_steps):
        m = cfg.m_min * (1.0 + cfg.growth) ** i
        if m >= 1.0:
            out.append(1.0)
            break
        out.append(m)
    return out


@dataclass(frozen=True)
class ClusterTask:
    """Everything the search needs for one cluster: its complete windows,
    the missing patterns assigned to it, and the imputer family to fit."""

    cluster: int
    targets: tuple[SeriesWindow, ...]
    patterns: dict[str, MaskVector]
    imputer_spec: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        for t in self.targets:
            if not t.is_complete:
                raise ContractViolation(f"cluster target {t.key} is not complete")


@dataclass(frozen=True)
class TraceRow:
    m: float
    l_oracle: float
    sigma: float
    l_real: float
    gap: float

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "l_oracle": self.l_oracle,
            "sigma": self.sigma,
            "l_real": self.l_real,
            "gap": self.gap,
        }


@dataclass(frozen=True)
class MaskSearchTrace:
    rows: tuple[TraceRow, ...]
    m_star: float
    converged: bool
    sigma_floored: bool
    n_train_targets: int
    n_val: int

    def as_dict(self) -> dict:
        return {
            "rows": [r.as_dict() for r in self.rows],
            "m_star": self.m_star,
            "converged": self.converged,
            "sigma_floored": self.sigma_floored,
            "n_train_targets": self.n_train_targets,
            "n_val": self.n_val,
        }


def split_validation(
    task: ClusterTask, cfg: MaskSearchConfig
) -> tuple[list[SeriesWindow], list[SeriesWindow]]:
    """Seeded holdout split of the cluster's complete windows."""
    n = len(task.targets)
    if n < 2:
        raise ContractViolation("cluster needs at least 2 complete windows to hold out")
    n_val = max(1, int(round(cfg.val_fraction * n)))
    if n - n_val < 1:
        n_val = n - 1
    perm = derive_rng(task.seed, "valsplit").permutation(n)
    val = [task.targets[int(i)] for i in perm[:n_val]]
    train = [task.targets[int(i)] for i in perm[n_val:]]
    overlap = {t.key for t in train} & {v.key for v in val}
    if overlap:
        raise ContractViolation(f"validation windows overlap training targets: {overlap}")
    return train, val


def _val_proj_masks(task: ClusterTask, val: list[SeriesWindow]) -> list[MaskVector]:
    """Fix one missing pattern per validation window (round-robin over the
    sorted pattern ids), constant across all schedule points."""
    keys = sorted(task.patterns)
    if not keys:
        return [MaskVector.ones(v.w) for v in val]
    return [task.patterns[keys[j % len(keys)]] for j, v in enumerate(val)]


def _bern_bits(u: np.ndarray, m: float) -> np.ndarray:
    """Hide positions whose uniform draw falls below m; always hides at
    least the smallest draw so the evaluation loss is defined at tiny m."""
    bits = (u >= m).astype(np.uint8)
    if bits.all():
        bits[int(np.argmin(u))] = 0
    return bits


def _eval_masks(
    task: ClusterTask, val: list[SeriesWindow], vproj: list[MaskVector], tag: str, m: float
) -> list[np.ndarray]:
    """Shared evaluation holes per validation window: the window's fixed
    pattern plus artificial hiding at the current rate. Both arms score on
    the same holes, so the gap isolates the training-representation effect."""
    out = []
    for j, win in enumerate(val):
        u = derive_rng(task.seed, "eval", tag, win.key).random(win.w)
        combined = vproj[j].bits & _bern_bits(u, m)
        out.append(combined)
    return out


def _val_loss(imputer, val: list[SeriesWindow], bits_list: list[np.ndarray]) -> float:
    """Mean over validation windows of the per-window MSE at hidden slots."""
    losses = []
    for win, bits in zip(val, bits_list):
        visible = np.where(bits == 1, win.values, np.nan)
        pred = imputer.impute(visible, bits)
        losses.append(mse_loss(pred, win.values, bits))
    return float(np.mean(losses))


def _fit_arm(task: ClusterTask, samples, rate: float, tag: str, representation: str):
    gen = bernoulli_mask_gen(rate, task.seed, tag)
    d_proj, d_mask, d_both = build_training_sets(samples, gen)
    ts = d_mask if representation == "mask" else d_both
    return make_imputer(task.imputer_spec).fit(ts.values, ts.mask)


def min_mask_search(task: ClusterTask, cfg: MaskSearchConfig) -> MaskSearchTrace:
    """Walk the schedule; at each rate compare the projection model's loss
    to the oracle's run-averaged loss, stopping at the first rate whose gap
    falls below twice the oracle's run spread. If no rate converges, the
    smallest-gap rate is returned with converged=False.
    """
    train_targets, val = split_validation(task, cfg)
    samples, recycled = pair_projections(train_targets, task.patterns, task.seed)
    if recycled:
        log.debug("cluster %d recycled %d projection targets", task.cluster, recycled)
    vproj = _val_proj_masks(task, val)

    rows: list[TraceRow] = []
    converged_idx: int | None = None
    floored = False
    for i, m in enumerate(mask_schedule(cfg)):
        eval_bits = _eval_masks(task, val, vproj, f"step:{i}", m)
        oracle_losses = [
            _val_loss(_fit_arm(task, samples, m, f"oracle:{i}:{r}", "mask"), val, eval_bits)
            for r in range(cfg.oracle_runs)
        ]
        l_oracle = float(np.mean(oracle_losses))
        sigma = float(np.std(oracle_losses))
        proj_model = _fit_arm(task, samples, m, f"proj:{i}", "both")
        l_real = _val_loss(proj_model, val, eval_bits)
        gap = abs(l_real - l_oracle)
        rows.append(TraceRow(m=m, l_oracle=l_oracle, sigma=sigma, l_real=l_real, gap=gap))
        if sigma < SIGMA_FLOOR:
            floored = True
        if converged_idx is None and gap < 2.0 * max(sigma, SIGMA_FLOOR):
            converged_idx = i
            if not cfg.explore_full:
                break

    if converged_idx is not None:
        m_star = rows[converged_idx].m
        converged = True
    else:
        m_star = min(rows, key=lambda r: r.gap).m
        converged = False
    return MaskSearchTrace(
        rows=tuple(rows),
        m_star=m_star,
        converged=converged,
        sigma_floored=floored,
        n_train_targets=len(train_targets),
        n_val=len(val),
    )


def train_final(task: ClusterTask, cfg: MaskSearchConfig, m_star: float):
    """Fit the deliverable per-cluster model on the combined representation
    at the chosen rate; returns (imputer, validation loss)."""
    if not 0.0 < m_star <= 1.0:
        raise ContractViolation("m_star must lie in (0, 1]")
    train_targets, val = split_validation(task, cfg)
    samples, _ = pair_projections(train_targets, task.patterns, task.seed)
    model = _fit_arm(task, samples, m_star, "final", "both")
    vproj = _val_proj_masks(task, val)
    eval_bits = _eval_masks(task, val, vproj, "final", m_star)
    loss = _val_loss(model, val, eval_bits)
    return model, loss
