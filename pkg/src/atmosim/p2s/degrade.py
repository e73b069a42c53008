"""The basis-convolution degradation and its exact adjoints.

The per-pixel kernel is mean + sum_l beta~[i, l] * phi_l with beta~ the
bilinear upsampling of per-anchor coefficients, so the whole image needs
only L + 1 shift-invariant convolutions regardless of anchor count: convolve
once per basis kernel, then blend the results with the upsampled coefficient
maps.  Tilt is not in the basis; it rides in the companion flow field, which
is applied first (tilt-then-blur) and treated as fixed by the adjoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgcore import downsample_grid_adjoint, fft_convolve, fft_convolve_adjoint, grid_weights, warp, warp_vjp
from ..imgcore.image import as_flow, as_image
from .basis import BasisSet


@dataclass
class BetaField:
    """Per-anchor basis coefficients plus the tilt flow they ride with."""

    anchor_rows: np.ndarray
    anchor_cols: np.ndarray
    beta: np.ndarray
    flow: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.anchor_rows, dtype=np.float64)
        cols = np.asarray(self.anchor_cols, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        flow = np.asarray(self.flow, dtype=np.float64)
        if rows.ndim != 1 or cols.ndim != 1 or rows.size < 1 or cols.size < 1:
            raise ValueError("anchor coordinates must be non-empty 1-D arrays")
        if np.any(np.diff(rows) <= 0) or np.any(np.diff(cols) <= 0):
            raise ValueError("anchor coordinates must be strictly increasing")
        if beta.ndim != 3 or beta.shape[:2] != (rows.size, cols.size):
            raise ValueError(
                f"beta must have shape ({rows.size}, {cols.size}, L), got {beta.shape}"
            )
        if flow.ndim != 3 or flow.shape[2] != 2:
            raise ValueError("flow must have shape (H, W, 2)")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(flow))):
            raise ValueError("beta and flow must be finite")
        self.anchor_rows = rows
        self.anchor_cols = cols
        self.beta = beta
        self.flow = flow

    @property
    def n_components(self) -> int:
        return self.beta.shape[2]

    def to_json(self) -> dict:
        return {
            "kind": "beta_field",
            "anchor_rows": self.anchor_rows.tolist(),
            "anchor_cols": self.anchor_cols.tolist(),
            "beta": self.beta.tolist(),
            "flow": self.flow.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BetaField":
        if doc.get("kind") != "beta_field":
            raise ValueError("not a beta field document")
        return cls(
            np.array(doc["anchor_rows"], dtype=np.float64),
            np.array(doc["anchor_cols"], dtype=np.float64),
            np.array(doc["beta"], dtype=np.float64),
            np.array(doc["flow"], dtype=np.float64),
        )


def _check_geometry(x: np.ndarray, field: BetaField, basis: BasisSet):
    if field.n_components != basis.n_components:
        raise ValueError(
            f"beta has {field.n_components} components but the basis has {basis.n_components}"
        )
    if basis.ksize > min(x.shape[0], x.shape[1]):
        raise ValueError(f"kernel size {basis.ksize} exceeds image extent {min(x.shape[:2])}")
    if field.anchor_rows[0] < 0 or field.anchor_rows[-1] > x.shape[0] - 1:
        raise ValueError("anchor rows fall outside the image")
    if field.anchor_cols[0] < 0 or field.anchor_cols[-1] > x.shape[1] - 1:
        raise ValueError("anchor cols fall outside the image")
    return grid_weights(field.anchor_rows, x.shape[0]), grid_weights(field.anchor_cols, x.shape[1])


def _blend(map2d: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return map2d[:, :, None] * arr if arr.ndim == 3 else map2d * arr


def p2s_degrade(x: np.ndarray, field: BetaField, basis: BasisSet, boundary: str = "zero") -> np.ndarray:
    """Warp by the field's flow, then apply the blended basis convolution."""
    x = as_image(x)
    flow = as_flow(field.flow, x.shape)
    wr, wc = _check_geometry(x, field, basis)
    xw = warp(x, flow)
    y = fft_convolve(xw, basis.mean_kernel, boundary)
    for l in range(basis.n_components):
        conv = fft_convolve(xw, basis.components[l], boundary)
        y = y + _blend(wr @ field.beta[:, :, l] @ wc.T, conv)
    return y


def p2s_vjp(x: np.ndarray, field: BetaField, basis: BasisSet, ybar: np.ndarray, boundary: str = "zero"):
    """Exact adjoints of `p2s_degrade` in the image and the coefficients.

    Returns (xbar, betabar) with betabar of shape (R, C, L).  The flow is
    held fixed, matching how the simulator is differentiated.
    """
    x = as_image(x)
    ybar = np.asarray(ybar, dtype=np.float64)
    if ybar.shape != x.shape:
        raise ValueError(f"cotangent shape {ybar.shape} does not match image {x.shape}")
    flow = as_flow(field.flow, x.shape)
    wr, wc = _check_geometry(x, field, basis)
    xw = warp(x, flow)

    zbar = fft_convolve_adjoint(ybar, basis.mean_kernel, boundary)
    betabar = np.zeros_like(field.beta)
    for l in range(basis.n_components):
        conv = fft_convolve(xw, basis.components[l], boundary)
        prod = ybar * conv
        if prod.ndim == 3:
            prod = prod.sum(axis=2)
        betabar[:, :, l] = downsample_grid_adjoint(prod, field.anchor_rows, field.anchor_cols)
        zbar = zbar + fft_convolve_adjoint(
            _blend(wr @ field.beta[:, :, l] @ wc.T, ybar), basis.components[l], boundary
        )
    xbar, _ = warp_vjp(x, flow, zbar)
    return xbar, betabar
