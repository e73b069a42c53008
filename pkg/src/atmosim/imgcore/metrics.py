"""Image fidelity metrics."""

from __future__ import annotations

import math

import numpy as np


def mean_squared_error(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference with compensated accumulation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = (a - b).ravel()
    return math.fsum(d * d) / d.size


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = mean_squared_error(a, b)
    if err == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / err)
