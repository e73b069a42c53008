"""State vectors for the lightweight degradation models.

A state is pure data: it names the knobs of one degradation family and
nothing else.  Applying a state to an image is deterministic; all sampling
happens when the state (or a companion noise realization) is drawn.  States
serialize to JSON dictionaries under a ``"family"`` discriminator, and the
encoding is lossless: floats survive the round trip bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_sigma(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class JitterState:
    """Per-pixel i.i.d. Gaussian displacement plus one shared Gaussian blur.

    ``sigma_jitter`` is the displacement scale in pixels, ``sigma_blur`` the
    blur width in pixels.  Both may be zero; the zero state is the identity.
    """

    sigma_jitter: float
    sigma_blur: float

    def __post_init__(self):
        object.__setattr__(self, "sigma_jitter", _check_sigma("sigma_jitter", self.sigma_jitter))
        object.__setattr__(self, "sigma_blur", _check_sigma("sigma_blur", self.sigma_blur))


@dataclass(frozen=True)
class DeformState:
    """Anchor-grid displacements upsampled to a smooth flow, plus shared blur.

    ``anchor_rows`` / ``anchor_cols`` are strictly increasing pixel
    coordinates (at least two per axis), ``displacements`` is the (R, C, 2)
    array of per-anchor (row, col) shifts in pixels.
    """

    anchor_rows: np.ndarray
    anchor_cols: np.ndarray
    displacements: np.ndarray
    sigma_blur: float

    def __post_init__(self):
        rows = np.asarray(self.anchor_rows, dtype=np.float64)
        cols = np.asarray(self.anchor_cols, dtype=np.float64)
        disp = np.asarray(self.displacements, dtype=np.float64)
        if rows.ndim != 1 or cols.ndim != 1 or rows.size < 2 or cols.size < 2:
            raise ValueError("anchor grid must have at least 2 rows and 2 cols")
        if np.any(np.diff(rows) <= 0) or np.any(np.diff(cols) <= 0):
            raise ValueError("anchor coordinates must be strictly increasing")
        if disp.shape != (rows.size, cols.size, 2):
            raise ValueError(
                f"displacements must have shape ({rows.size}, {cols.size}, 2), got {disp.shape}"
            )
        if not np.all(np.isfinite(disp)):
            raise ValueError("displacements must be finite")
        object.__setattr__(self, "anchor_rows", rows)
        object.__setattr__(self, "anchor_cols", cols)
        object.__setattr__(self, "displacements", disp)
        object.__setattr__(self, "sigma_blur", _check_sigma("sigma_blur", self.sigma_blur))

    @property
    def grid_shape(self):
        return (self.anchor_rows.size, self.anchor_cols.size)


def state_to_json(state) -> dict:
    """Encode a degradation state as a JSON-safe dict with a family tag."""
    if isinstance(state, JitterState):
        return {
            "family": "jitter",
            "sigma_jitter": state.sigma_jitter,
            "sigma_blur": state.sigma_blur,
        }
    if isinstance(state, DeformState):
        return {
            "family": "deform",
            "anchor_rows": state.anchor_rows.tolist(),
            "anchor_cols": state.anchor_cols.tolist(),
            "displacements": state.displacements.tolist(),
            "sigma_blur": state.sigma_blur,
        }
    raise TypeError(f"unknown state type {type(state).__name__}")


def state_from_json(doc: dict):
    """Inverse of `state_to_json`."""
    family = doc.get("family")
    if family == "jitter":
        return JitterState(doc["sigma_jitter"], doc["sigma_blur"])
    if family == "deform":
        return DeformState(
            np.array(doc["anchor_rows"], dtype=np.float64),
            np.array(doc["anchor_cols"], dtype=np.float64),
            np.array(doc["displacements"], dtype=np.float64),
            doc["sigma_blur"],
        )
    raise ValueError(f"unknown state family {family!r}")
