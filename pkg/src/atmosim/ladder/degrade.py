"""The lightweight degradation ladder: jitter, deform, varying, flipped.

Four models of increasing fidelity, all sharing the tilt-then-blur
composition of the physical forward model:

jitter    warp by i.i.d. Gaussian per-pixel flow, then one shared blur.
deform    warp by a smooth flow upsampled from anchor displacements, then
          one shared blur.
varying   warp by a given flow, then spatially varying convolution with a
          per-anchor kernel field (scatter form).
flipped   the same two operators in blur-then-tilt order, kept as a separate
          family because the orders only agree where the kernel field and
          flow are locally constant.

The blur step is skipped entirely at sigma = 0, so every zero-strength state
reproduces its input bit for bit.  Boundary handling defaults to zero
padding, matching the anchored split-step reference these models are judged
against.
"""

from __future__ import annotations

import numpy as np

from ..imgcore import PSFField, RngStream, as_flow, as_image, fft_convolve, gaussian_kernel, sv_convolve, upsample_grid, warp
from ..imgcore.image import map_channels
from .states import DeformState, JitterState

DEGRADE_BOUNDARY = "zero"


def blur_shared(x: np.ndarray, sigma: float, boundary: str = DEGRADE_BOUNDARY, radius: int | None = None) -> np.ndarray:
    """Gaussian blur shared by the whole frame; the identity at sigma = 0."""
    x = as_image(x)
    if radius is None:
        radius = int(np.ceil(4.0 * float(sigma))) if sigma > 0 else 0
    if radius == 0:
        return x.copy()
    return fft_convolve(x, gaussian_kernel(sigma, radius), boundary)


def sample_jitter_flow(shape, sigma_jitter: float, rng: RngStream) -> np.ndarray:
    """Draw the i.i.d. Gaussian per-pixel flow of the jitter model."""
    sigma_jitter = float(sigma_jitter)
    if sigma_jitter < 0 or not np.isfinite(sigma_jitter):
        raise ValueError("sigma_jitter must be finite and >= 0")
    return sigma_jitter * rng.standard_normal((int(shape[0]), int(shape[1]), 2))


def jitter_degrade(x: np.ndarray, state: JitterState, rng: RngStream, boundary: str = DEGRADE_BOUNDARY):
    """Pixel-jitter model: y = blur(warp(x, flow)) with freshly drawn flow.

    Returns (y, flow).  The state holds only the two scales; the flow
    realization comes from `rng`, so replaying the same stream replays the
    degradation exactly.
    """
    x = as_image(x)
    flow = sample_jitter_flow(x.shape, state.sigma_jitter, rng)
    y = blur_shared(warp(x, flow), state.sigma_blur, boundary)
    return y, flow


def deform_flow(state: DeformState, shape) -> np.ndarray:
    """Bilinear upsampling of the anchor displacements to a full flow field."""
    return upsample_grid(state.displacements, state.anchor_rows, state.anchor_cols, shape)


def deform_degrade(x: np.ndarray, state: DeformState, boundary: str = DEGRADE_BOUNDARY):
    """Deformable-grid model: y = blur(warp(x, upsample(displacements))).

    Deterministic: all randomness lives in whoever sampled the state.
    Returns (y, flow).
    """
    x = as_image(x)
    if state.anchor_rows[0] < 0 or state.anchor_rows[-1] > x.shape[0] - 1:
        raise ValueError("anchor rows fall outside the image")
    if state.anchor_cols[0] < 0 or state.anchor_cols[-1] > x.shape[1] - 1:
        raise ValueError("anchor cols fall outside the image")
    flow = deform_flow(state, x.shape)
    y = blur_shared(warp(x, flow), state.sigma_blur, boundary)
    return y, flow


def sample_deform_state(shape, grid_shape, sigma_disp: float, sigma_blur: float, rng: RngStream) -> DeformState:
    """Draw a deform state with Gaussian anchor displacements on a regular grid."""
    from ..oracle import anchor_grid

    rows, cols = anchor_grid(shape, grid_shape[0], grid_shape[1])
    disp = float(sigma_disp) * rng.standard_normal((rows.size, cols.size, 2))
    return DeformState(rows, cols, disp, sigma_blur)


def varying_degrade(x: np.ndarray, psfs: PSFField, flow: np.ndarray, boundary: str = DEGRADE_BOUNDARY) -> np.ndarray:
    """Tilt-then-blur with a spatially varying kernel field (scatter form)."""
    x = as_image(x)
    flow = as_flow(flow, x.shape)
    warped = warp(x, flow)
    return map_channels(lambda ch: sv_convolve(ch, psfs, "scatter", boundary), warped)


def flipped_degrade(x: np.ndarray, psfs: PSFField, flow: np.ndarray, boundary: str = DEGRADE_BOUNDARY) -> np.ndarray:
    """Blur-then-tilt variant of `varying_degrade` (the swapped order)."""
    x = as_image(x)
    flow = as_flow(flow, x.shape)
    blurred = map_channels(lambda ch: sv_convolve(ch, psfs, "scatter", boundary), x)
    return warp(blurred, flow)
