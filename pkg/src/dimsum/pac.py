"""Sample-size bound, reconstruction test statistic, and per-cluster
validation verdicts for the learning guarantee."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, PacConfig

log = logging.getLogger(__name__)

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_BOUND_UNMET = "bound-unmet"
VERDICT_INFEASIBLE = "infeasible"
VERDICT_INSUFFICIENT = "insufficient-data"


def pac_sample_bound(cfg: PacConfig) -> int:
    """Minimum observable sample mass per cluster:
    ceil((1/eps) * (3*ln(1/eps) + ln(1/delta))). Natural log; the constant 3
    is the VC dimension of the linear decision rule over the proportions."""
    eps, delta = cfg.epsilon, cfg.delta
    return int(math.ceil((1.0 / eps) * (3.0 * math.log(1.0 / eps) + math.log(1.0 / delta))))


def test_statistic(model, sample, tau: float) -> int | None:
    """1 iff every projected (hidden) position is reconstructed within tau of
    the ground truth; 0 otherwise. None when the sample has no projected
    positions (such windows are excluded from the pass rate).
    """
    if not tau > 0:
        raise ContractViolation("tau must be positive")
    holes = sample.proj_mask.bits == 0
    if not holes.any():
        return None
    visible = np.where(holes, np.nan, sample.ground_truth)
    pred = model.impute(visible, sample.proj_mask.bits)
    err = np.abs(pred[holes] - sample.ground_truth[holes])
    return int(bool((err <= tau).all()))


@dataclass(frozen=True)
class Proportions:
    """Window-position budget split: alpha (real missing via projection),
    beta (artificial mask), gamma (remaining observable)."""

    alpha: float
    beta: float
    gamma: float
    infeasible: bool

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "infeasible": self.infeasible,
        }


def compute_proportions(samples, m_star: float) -> Proportions:
    """alpha = mean projected-missing fraction over the cluster's samples,
    beta = m_star, gamma = 1 - alpha - beta (clamped at 0, flagged)."""
    if not samples:
        raise ContractViolation("cluster has no samples")
    if not 0.0 <= m_star <= 1.0:
        raise ContractViolation("m_star must lie in [0, 1]")
    alpha = float(np.mean([s.proj_mask.missing_rate for s in samples]))
    beta = float(m_star)
    gamma = 1.0 - alpha - beta
    infeasible = gamma < 0.0
    if infeasible:
        log.warning("alpha + beta exceed 1 (%.3f + %.3f); gamma clamped to 0", alpha, beta)
        gamma = 0.0
    return Proportions(alpha, beta, gamma, infeasible)


@dataclass(frozen=True)
class PacReport:
    """Per-cluster validation outcome."""

    alpha: float
    beta: float
    gamma: float
    n_req: int
    observable_mass: float  # |S_k| * gamma
    satisfied: bool  # observable_mass >= n_req
    pass_rate: float | None
    threshold: float  # 1 - delta
    counted: int
    excluded: int
    verdict: str

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "n_req": self.n_req,
            "observable_mass": self.observable_mass,
            "satisfied": self.satisfied,
            "pass_rate": self.pass_rate,
            "threshold": self.threshold,
            "counted": self.counted,
            "excluded": self.excluded,
            "verdict": self.verdict,
        }


def validate_cluster(model, samples, cfg: PacConfig, m_star: float, tau: float) -> PacReport:
    """Empirical pass rate of the test statistic vs 1 - delta, combined with
    the sample-mass feasibility checks, into a single verdict."""
    n_req = pac_sample_bound(cfg)
    threshold = 1.0 - cfg.delta
    if not samples:
        return PacReport(
            alpha=0.0,
            beta=float(m_star),
            gamma=0.0,
            n_req=n_req,
            observable_mass=0.0,
            satisfied=False,
            pass_rate=None,
            threshold=threshold,
            counted=0,
            excluded=0,
            verdict=VERDICT_INSUFFICIENT,
        )
    props = compute_proportions(samples, m_star)
    mass = len(samples) * props.gamma
    satisfied = mass >= n_req
    outcomes = [test_statistic(model, s, tau) for s in samples]
    counted = [o for o in outcomes if o is not None]
    excluded = len(outcomes) - len(counted)
    pass_rate = float(np.mean(counted)) if counted else None

    if props.infeasible:
        verdict = VERDICT_INFEASIBLE
    elif pass_rate is None:
        verdict = VERDICT_INSUFFICIENT
    elif props.gamma < cfg.gamma_min or not satisfied:
        verdict = VERDICT_BOUND_UNMET
    elif pass_rate >= threshold:
        verdict = VERDICT_PASS
    else:
        verdict = VERDICT_FAIL
    return PacReport(
        alpha=props.alpha,
        beta=props.beta,
        gamma=props.gamma,
        n_req=n_req,
        observable_mass=mass,
        satisfied=satisfied,
        pass_rate=pass_rate,
        threshold=threshold,
        counted=len(counted),
        excluded=excluded,
        verdict=verdict,
    )
