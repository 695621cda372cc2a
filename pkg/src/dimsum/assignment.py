"""Capacity- and sample-budget-aware assignment of incomplete windows to
fitted clusters, with per-cluster observable-mass accounting."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .core import ContractViolation, PacConfig, SeriesWindow, derive_rng
from .distance import dtw_arow_to_centroid
from .pac import pac_sample_bound

log = logging.getLogger(__name__)


def observable_ratio(alpha: float, mask_ratio: float) -> float:
    """Fraction of a window's positions the model will actually see during
    training: (1 - alpha) real-missing survivors times (1 - mask_ratio)."""
    return (1.0 - alpha) * (1.0 - mask_ratio)


@dataclass(frozen=True)
class ClusterAssignment:
    """One cluster's admission ledger."""

    cluster: int
    members: tuple[str, ...]  # admission order
    gammas: tuple[float, ...]
    observable: float
    target: float
    capacity: float
    fallback_members: tuple[str, ...]
    demand: int  # expected further admissions needed at current mean gamma

    @property
    def satisfied(self) -> bool:
        return self.observable >= self.target

    def as_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "members": list(self.members),
            "gammas": list(self.gammas),
            "observable": self.observable,
            "target": self.target,
            "capacity": self.capacity if math.isfinite(self.capacity) else None,
            "fallback_members": list(self.fallback_members),
            "demand": self.demand,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class AssignmentState:
    """Full outcome of one assignment pass over the incomplete windows."""

    clusters: tuple[ClusterAssignment, ...]
    mask_ratio: float
    n_req: int
    scanned: int
    early_exit: bool

    def membership(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for ca in self.clusters:
            for key in ca.members:
                out[key] = ca.cluster
        return out

    def as_dict(self) -> dict:
        return {
            "clusters": [ca.as_dict() for ca in self.clusters],
            "mask_ratio": self.mask_ratio,
            "n_req": self.n_req,
            "scanned": self.scanned,
            "early_exit": self.early_exit,
        }


class _Ledger:
    """Mutable per-cluster accounting used while scanning."""

    __slots__ = ("members", "gammas", "fallback", "observable")

    def __init__(self):
        self.members: list[str] = []
        self.gammas: list[float] = []
        self.fallback: list[str] = []
        self.observable = 0.0


def _distance_rows(windows, centroids, threads: int) -> list[np.ndarray]:
    def row(win):
        return np.array([dtw_arow_to_centroid(win, c) for c in centroids])

    if threads > 1 and len(windows) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, windows))
    return [row(w) for w in windows]


def _demand(target: float, ledger: _Ledger, gamma_prior: float) -> int:
    gap = target - ledger.observable
    if gap <= 0 or not math.isfinite(gap):
        return 0
    mean_gamma = float(np.mean(ledger.gammas)) if ledger.gammas else gamma_prior
    if mean_gamma <= 0:
        return 0
    return int(math.ceil(gap / mean_gamma))


def assign_incomplete(
    model: ClusterModel,
    incomplete: list[SeriesWindow],
    pac_cfg: PacConfig,
    mask_ratio: float,
    seed: int,
    target_override: float | None = None,
    capacity_override: float | None = None,
    threads: int = 1,
    chunk: int = 64,
) -> AssignmentState:
    """Scan incomplete windows in seeded random order and admit each into the
    nearest cluster (corrected elastic distance) that still wants observable
    mass and has room. A window whose candidates are all full or satisfied
    falls back to the least-populated cluster, nearest first on ties.

    Scanning stops early once every cluster's accumulated observable mass
    meets its target. Distances are computed in parallel per chunk; the
    admissions themselves stay serial because the accounting is
    order-sensitive.
    """
    if model.k < 1:
        raise ContractViolation("assignment needs at least one cluster")
    if not 0.0 <= mask_ratio < 1.0:
        raise ContractViolation("mask_ratio must lie in [0, 1)")
    n_req = pac_sample_bound(pac_cfg)
    target = float(n_req) if target_override is None else float(target_override)

    rates = [w.missing_rate for w in incomplete]
    alpha_prior = float(np.mean(rates)) if rates else 0.0
    gamma_prior = observable_ratio(alpha_prior, mask_ratio)
    if capacity_override is not None:
        capacity = float(capacity_override)
    elif gamma_prior > 0 and math.isfinite(target):
        capacity = float(2 * math.ceil(target / gamma_prior))
    else:
        capacity = math.inf

    order = derive_rng(seed, "assign").permutation(len(incomplete))
    ledgers = [_Ledger() for _ in range(model.k)]
    scanned = 0
    done = False

    def all_satisfied() -> bool:
        return all(lg.observable >= target for lg in ledgers)

    for start in range(0, len(order), max(1, chunk)):
        if done or all_satisfied():
            break
        idx = order[start : start + max(1, chunk)]
        windows = [incomplete[int(i)] for i in idx]
        rows = _distance_rows(windows, model.centroids, threads)
        for win, dists in zip(windows, rows):
            if all_satisfied():
                done = True
                break
            scanned += 1
            ranked = np.argsort(dists, kind="stable")
            chosen = None
            for c in ranked:
                lg = ledgers[int(c)]
                if lg.observable < target and len(lg.members) < capacity:
                    chosen = int(c)
                    break
            fallback = chosen is None
            if fallback:
                pos = min(
                    range(len(ranked)),
                    key=lambda p: (len(ledgers[int(ranked[p])].members), p),
                )
                chosen = int(ranked[pos])
            lg = ledgers[chosen]
            gamma = observable_ratio(win.missing_rate, mask_ratio)
            lg.members.append(win.key)
            lg.gammas.append(gamma)
            lg.observable += gamma
            if fallback:
                lg.fallback.append(win.key)

    early_exit = scanned < len(incomplete)

    clusters = tuple(
        ClusterAssignment(
            cluster=c,
            members=tuple(lg.members),
            gammas=tuple(lg.gammas),
            observable=lg.observable,
            target=target,
            capacity=capacity,
            fallback_members=tuple(lg.fallback),
            demand=_demand(target, lg, gamma_prior),
        )
        for c, lg in enumerate(ledgers)
    )
    return AssignmentState(
        clusters=clusters,
        mask_ratio=mask_ratio,
        n_req=n_req,
        scanned=scanned,
        early_exit=early_exit,
    )
