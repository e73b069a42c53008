"""Array conventions and validation for images, flow fields, complex fields.

Images are float64 numpy arrays, (H, W) for grayscale or (H, W, 3) for RGB,
nominally valued in [0, 1].  Flow fields are (H, W, 2) float64 arrays holding
per-pixel displacement in pixels, channel 0 = row displacement, channel 1 =
column displacement.  Complex optical fields carry their grid spacing with
them because propagation steps need it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_image(x, name: str = "image") -> np.ndarray:
    """Validate and return `x` as a float64 image array.

    Accepts (H, W) or (H, W, 3) with H, W >= 1; all values must be finite.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3 and x.shape[2] == 1:
        x = x[:, :, 0]
    if x.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {x.shape}")
    if x.ndim == 3 and x.shape[2] != 3:
        raise ValueError(f"{name} must have 3 channels if 3-D, got {x.shape[2]}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"{name} must have positive height and width")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def as_flow(flow, shape=None, name: str = "flow") -> np.ndarray:
    """Validate a (H, W, 2) flow field; optionally check it matches `shape`."""
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"{name} must have shape (H, W, 2), got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError(f"{name} contains non-finite values")
    if shape is not None and flow.shape[:2] != tuple(shape[:2]):
        raise ValueError(
            f"{name} shape {flow.shape[:2]} does not match image shape {tuple(shape[:2])}"
        )
    return flow


def channels_of(x: np.ndarray):
    """Iterate over the 2-D channel views of an image."""
    if x.ndim == 2:
        yield x
    else:
        for c in range(x.shape[2]):
            yield x[:, :, c]


def map_channels(fn, x: np.ndarray) -> np.ndarray:
    """Apply a (H, W) -> (H, W) function independently to each channel."""
    if x.ndim == 2:
        return fn(x)
    return np.stack([fn(x[:, :, c]) for c in range(x.shape[2])], axis=2)


@dataclass
class ComplexField:
    """A sampled complex optical field on a square grid.

    Attributes
    ----------
    data : (N, N) complex128
    dx : float
        Grid spacing in meters, > 0.
    """

    data: np.ndarray
    dx: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError(f"field must be square 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite values")
        self.dx = float(self.dx)
        if self.dx <= 0:
            raise ValueError("dx must be positive")

    @property
    def grid(self) -> int:
        return self.data.shape[0]

    def power(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))
