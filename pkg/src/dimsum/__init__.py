"""Model-agnostic preprocessing and training orchestration for univariate
time-series imputation: tumbling-window partitioning, pattern clustering,
missing-pattern projection, minimum-mask search, and PAC-style validation."""

__version__ = "0.1.0"

from .core import (
    ContractViolation,
    ConfigError,
    MaskVector,
    PacConfig,
    RawSeries,
    RunSeed,
    SeriesWindow,
    apply_mask,
    derive_rng,
    mask_and,
)

__all__ = [
    "ContractViolation",
    "ConfigError",
    "MaskVector",
    "PacConfig",
    "RawSeries",
    "RunSeed",
    "SeriesWindow",
    "apply_mask",
    "derive_rng",
    "mask_and",
]
