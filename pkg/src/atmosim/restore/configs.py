"""Configuration records for the reconstruction operators."""

from __future__ import annotations

from dataclasses import dataclass, fields


def _from_mapping(cls, doc: dict):
    known = {f.name for f in fields(cls)}
    for key in doc:
        if key not in known:
            raise ValueError(f"unknown {cls.__name__} key {key!r}")
    return cls(**doc)


@dataclass(frozen=True)
class ReconConfig:
    """Knobs for the variational reconstruction.

    The objective is sum((H(x) - y)^2) * (1 + mu) + lam_tv * TV_eps(x), with
    the smoothed isotropic total variation TV_eps = sum sqrt(|grad x|^2 +
    eps^2).  `mu` re-weights the data term as the re-degradation consistency
    penalty; `tol` stops the descent once the relative objective decrease per
    accepted step falls below it.
    """

    lam_tv: float = 1e-3
    eps_tv: float = 1e-3
    max_iter: int = 200
    step_init: float = 0.5
    backtrack: float = 0.5
    tol: float = 1e-7
    mu: float = 0.0

    def __post_init__(self):
        if self.lam_tv <= 0 or self.eps_tv <= 0:
            raise ValueError("lam_tv and eps_tv must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict) -> "ReconConfig":
        return _from_mapping(cls, doc)


@dataclass(frozen=True)
class LuckyConfig:
    """Patch selection settings for lucky fusion."""

    patch: int = 16
    stride: int = 8
    metric: str = "gradient-energy"

    def __post_init__(self):
        if self.patch < 8:
            raise ValueError("patch must be >= 8")
        if not 1 <= self.stride <= self.patch:
            raise ValueError("stride must lie in [1, patch]")
        if self.metric != "gradient-energy":
            raise ValueError(f"unknown sharpness metric {self.metric!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "LuckyConfig":
        return _from_mapping(cls, doc)
