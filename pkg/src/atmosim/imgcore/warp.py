"""Backward bilinear warping and anchor-grid interpolation.

`warp` resamples an image at p - flow(p) with bilinear interpolation and edge
clamping, so a zero flow is the identity and constant images are fixed points.
`warp_vjp` returns exact adjoints with respect to both the image and the flow;
the flow gradient is the standard piecewise-bilinear one, zero wherever a
coordinate was clamped.

`grid_weights` / `upsample_grid` / `downsample_grid_adjoint` implement
bilinear interpolation on a tensor grid of anchor points with clamped
extrapolation outside the anchor hull.  Flow fields, per-anchor PSF blending
and per-anchor coefficient maps all share this machinery.
"""

from __future__ import annotations

import numpy as np

from .image import as_flow, as_image, map_channels


def _sample_coords(x: np.ndarray, flow: np.ndarray):
    h, w = x.shape[0], x.shape[1]
    gr, gc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    ur = gr - flow[:, :, 0]
    uc = gc - flow[:, :, 1]
    cr = np.clip(ur, 0.0, h - 1.0)
    cc = np.clip(uc, 0.0, w - 1.0)
    r0 = np.floor(cr).astype(np.intp)
    c0 = np.floor(cc).astype(np.intp)
    r0 = np.minimum(r0, h - 2) if h > 1 else r0 * 0
    c0 = np.minimum(c0, w - 2) if w > 1 else c0 * 0
    fr = cr - r0
    fc = cc - c0
    return (cr, cc, ur, uc, r0, c0, fr, fc)


def warp(x: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp `x` by `flow`: out[p] = x sampled at p - flow[p]."""
    x = as_image(x)
    flow = as_flow(flow, x.shape)
    _, _, _, _, r0, c0, fr, fc = _sample_coords(x, flow)
    r1 = np.minimum(r0 + 1, x.shape[0] - 1)
    c1 = np.minimum(c0 + 1, x.shape[1] - 1)

    def samp(ch):
        return (
            ch[r0, c0] * (1 - fr) * (1 - fc)
            + ch[r0, c1] * (1 - fr) * fc
            + ch[r1, c0] * fr * (1 - fc)
            + ch[r1, c1] * fr * fc
        )

    return map_channels(samp, x)


def warp_vjp(x: np.ndarray, flow: np.ndarray, gbar: np.ndarray):
    """Adjoints of `warp` at (x, flow) applied to cotangent `gbar`.

    Returns (xbar, flowbar).  flowbar is zero at pixels whose sample
    coordinate was clamped to the image edge.
    """
    x = as_image(x)
    flow = as_flow(flow, x.shape)
    gbar = np.asarray(gbar, dtype=np.float64)
    h, w = x.shape[0], x.shape[1]
    cr, cc, ur, uc, r0, c0, fr, fc = _sample_coords(x, flow)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    # clamped coordinates do not respond to flow changes
    live_r = (ur == cr).astype(np.float64)
    live_c = (uc == cc).astype(np.float64)

    xbar = np.zeros_like(x)
    flowbar = np.zeros_like(flow)

    def one_channel(ch, gb, xb):
        np.add.at(xb, (r0, c0), gb * (1 - fr) * (1 - fc))
        np.add.at(xb, (r0, c1), gb * (1 - fr) * fc)
        np.add.at(xb, (r1, c0), gb * fr * (1 - fc))
        np.add.at(xb, (r1, c1), gb * fr * fc)
        # d(sample)/d(row coord) and /d(col coord) of bilinear interpolation
        dr = (ch[r1, c0] - ch[r0, c0]) * (1 - fc) + (ch[r1, c1] - ch[r0, c1]) * fc
        dc = (ch[r0, c1] - ch[r0, c0]) * (1 - fr) + (ch[r1, c1] - ch[r1, c0]) * fr
        # coord = p - flow, so d/dflow = -d/dcoord
        flowbar[:, :, 0] += gb * dr * -1.0 * live_r
        flowbar[:, :, 1] += gb * dc * -1.0 * live_c

    if x.ndim == 2:
        one_channel(x, gbar, xbar)
    else:
        for c in range(3):
            one_channel(x[:, :, c], gbar[:, :, c], xbar[:, :, c])
    return xbar, flowbar


def grid_weights(anchors: np.ndarray, n: int) -> np.ndarray:
    """(n, A) bilinear weight matrix for 1-D anchor coordinates.

    Each output position gets weight on its two bracketing anchors; positions
    outside the anchor span clamp to the nearest anchor.  Rows sum to 1.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 1 or anchors.size < 1:
        raise ValueError("anchors must be a non-empty 1-D array")
    if np.any(np.diff(anchors) <= 0):
        raise ValueError("anchors must be strictly increasing")
    pos = np.arange(n, dtype=np.float64)
    a = anchors.size
    wmat = np.zeros((n, a))
    if a == 1:
        wmat[:, 0] = 1.0
        return wmat
    idx = np.clip(np.searchsorted(anchors, pos, side="right") - 1, 0, a - 2)
    left = anchors[idx]
    right = anchors[idx + 1]
    t = np.clip((pos - left) / (right - left), 0.0, 1.0)
    wmat[np.arange(n), idx] = 1.0 - t
    wmat[np.arange(n), idx + 1] += t
    return wmat


def upsample_grid(values: np.ndarray, anchor_rows, anchor_cols, shape) -> np.ndarray:
    """Bilinearly interpolate per-anchor `values` (R, C, ...) to a full grid."""
    values = np.asarray(values, dtype=np.float64)
    wr = grid_weights(np.asarray(anchor_rows, dtype=np.float64), shape[0])
    wc = grid_weights(np.asarray(anchor_cols, dtype=np.float64), shape[1])
    return np.einsum("hr,wc,rc...->hw...", wr, wc, values)


def downsample_grid_adjoint(full: np.ndarray, anchor_rows, anchor_cols) -> np.ndarray:
    """Adjoint of `upsample_grid`: accumulate a full grid back onto anchors."""
    full = np.asarray(full, dtype=np.float64)
    wr = grid_weights(np.asarray(anchor_rows, dtype=np.float64), full.shape[0])
    wc = grid_weights(np.asarray(anchor_cols, dtype=np.float64), full.shape[1])
    return np.einsum("hr,wc,hw...->rc...", wr, wc, full)
