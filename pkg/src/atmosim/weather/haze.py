"""Haze composite, its analytic inverse, and dark-channel transmission estimation.

The forward model mixes the scene with a flat airlight color through a
per-pixel transmission map: y = x * t + A * (1 - t).  Everything here is
elementwise, so the partial derivatives are closed-form and exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter

from ..imgcore import as_image


def _unit_interval(name, value):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class HazeState:
    """Transmission map (scalar or per-pixel) plus airlight color.

    `transmission` is a scalar () array or an (H, W) map; `airlight` is a
    scalar (gray) or a 3-vector color.  Both live in [0, 1].
    """

    transmission: np.ndarray
    airlight: np.ndarray

    def __post_init__(self):
        t = _unit_interval("transmission", self.transmission)
        a = _unit_interval("airlight", self.airlight)
        if t.ndim not in (0, 2):
            raise ValueError("transmission must be a scalar or a 2-D map")
        if a.ndim not in (0, 1) or (a.ndim == 1 and a.shape != (3,)):
            raise ValueError("airlight must be a scalar or a 3-vector")
        object.__setattr__(self, "transmission", t)
        object.__setattr__(self, "airlight", a)

    def to_json(self) -> dict:
        return {
            "kind": "haze_state",
            "transmission": self.transmission.tolist(),
            "airlight": self.airlight.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HazeState":
        if doc.get("kind") != "haze_state":
            raise ValueError("not a haze_state document")
        return cls(np.array(doc["transmission"], dtype=np.float64),
                   np.array(doc["airlight"], dtype=np.float64))


def _broadcast(x, state):
    """Return (t, a) shaped to broadcast against the image."""
    t = state.transmission
    a = state.airlight
    if t.ndim == 2 and t.shape != x.shape[:2]:
        raise ValueError(f"transmission map {t.shape} does not match image {x.shape[:2]}")
    if x.ndim == 3:
        if t.ndim == 2:
            t = t[:, :, None]
    elif a.ndim == 1:
        raise ValueError("color airlight needs a 3-channel image")
    return t, a


def haze_apply(x, state: HazeState):
    """y = x * t + A * (1 - t), elementwise."""
    x = as_image(x)
    t, a = _broadcast(x, state)
    return x * t + a * (1.0 - t)


def haze_partials(x, state: HazeState):
    """Exact partials of haze_apply: (dy/dx, dy/dt, dy/dA) as broadcastable arrays."""
    x = as_image(x)
    t, a = _broadcast(x, state)
    return (
        np.broadcast_to(t, x.shape).copy(),
        np.broadcast_to(x - a, x.shape).copy(),
        np.broadcast_to(1.0 - t, x.shape).copy(),
    )


def haze_invert(y, state: HazeState, t_min: float = 0.1):
    """Algebraic inverse of haze_apply.

    Returns (x_hat, confident) where `confident` is False wherever the
    transmission fell below `t_min` and the division had to be guarded, so
    those pixels are extrapolations rather than exact inversions.
    """
    if t_min <= 0.0:
        raise ValueError("t_min must be positive")
    y = as_image(y)
    t, a = _broadcast(y, state)
    x_hat = (y - a * (1.0 - t)) / np.maximum(t, t_min)
    x_hat = np.clip(x_hat, 0.0, 1.0)
    confident = np.broadcast_to(np.squeeze(t) >= t_min, y.shape[:2]).copy()
    return x_hat, confident


def dark_channel_transmission(y, patch: int = 15, omega: float = 0.95):
    """Estimate (t_hat, a_hat) from a hazy color image via the dark channel.

    The dark channel is the per-pixel channel minimum followed by a square
    minimum filter.  The airlight estimate averages the image color over the
    brightest 0.1% of dark-channel pixels; the transmission estimate is
    1 - omega * darkchannel(y / a_hat), clipped to [0, 1].
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 3 or y.shape[2] != 3:
        raise ValueError("dark channel estimation needs a 3-channel image")
    if patch < 1 or patch % 2 == 0:
        raise ValueError("patch must be odd and positive")
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")

    dark = minimum_filter(y.min(axis=2), size=patch, mode="nearest")
    n_top = max(1, int(round(0.001 * dark.size)))
    flat = np.argsort(dark, axis=None)[-n_top:]
    idx = np.unravel_index(flat, dark.shape)
    a_hat = y[idx].mean(axis=0)
    a_hat = np.maximum(a_hat, 1e-6)  # black airlight would blow up the ratio

    normalized = minimum_filter((y / a_hat).min(axis=2), size=patch, mode="nearest")
    t_hat = np.clip(1.0 - omega * normalized, 0.0, 1.0)
    return t_hat, a_hat
