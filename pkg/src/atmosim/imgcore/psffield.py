"""Spatially varying point-spread-function fields.

A `PSFField` stores one odd, unit-sum kernel per anchor of a tensor grid of
anchor pixels.  The kernel acting at an arbitrary pixel is the bilinear blend
of its four surrounding anchor kernels (blend of kernels, not of blurred
outputs).  Because that blend is linear, spatially varying convolution with
the field reduces exactly to one shift-invariant convolution per anchor plus
per-pixel weight maps, which is how `sv_convolve` computes it.

Two application modes are provided:

scatter
    Each source pixel distributes its energy through its own kernel.  This is
    the physical forward model (light leaves a scene point and spreads) and
    the default.
gather
    Each output pixel integrates its neighborhood through its own kernel,
    out[i] = sum_j h_i[j] x[i - j].

The two coincide for spatially constant fields and differ otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convolve import _pad_gather, _pad_maps, kernel_spectrum
from .image import as_image
from .io import read_container, write_container
from .warp import grid_weights

KERNEL_SUM_TOL = 1e-6


def kernel_centroid(k: np.ndarray) -> np.ndarray:
    """Centroid (row, col) of a kernel relative to its center sample."""
    k = np.asarray(k, dtype=np.float64)
    r = k.shape[0] // 2
    idx = np.arange(k.shape[0], dtype=np.float64) - r
    s = k.sum()
    return np.array([np.sum(idx[:, None] * k), np.sum(idx[None, :] * k)]) / s


def kernel_second_moment(k: np.ndarray) -> np.ndarray:
    """Central 2x2 second-moment matrix of a kernel (sample units squared)."""
    k = np.asarray(k, dtype=np.float64)
    r = k.shape[0] // 2
    idx = np.arange(k.shape[0], dtype=np.float64) - r
    cen = kernel_centroid(k)
    dr = idx[:, None] - cen[0]
    dc = idx[None, :] - cen[1]
    s = k.sum()
    mrr = np.sum(dr * dr * k) / s
    mcc = np.sum(dc * dc * k) / s
    mrc = np.sum(dr * dc * k) / s
    return np.array([[mrr, mrc], [mrc, mcc]])


@dataclass
class PSFField:
    """Per-anchor kernels on a tensor grid of anchor pixel coordinates."""

    anchor_rows: np.ndarray
    anchor_cols: np.ndarray
    kernels: np.ndarray
    _spectra: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.anchor_rows = np.asarray(self.anchor_rows, dtype=np.float64)
        self.anchor_cols = np.asarray(self.anchor_cols, dtype=np.float64)
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        if self.anchor_rows.ndim != 1 or self.anchor_cols.ndim != 1:
            raise ValueError("anchor coordinates must be 1-D arrays")
        if np.any(np.diff(self.anchor_rows) <= 0) or np.any(np.diff(self.anchor_cols) <= 0):
            raise ValueError("anchor coordinates must be strictly increasing")
        r, c = self.anchor_rows.size, self.anchor_cols.size
        if self.kernels.ndim != 4 or self.kernels.shape[:2] != (r, c):
            raise ValueError(
                f"kernels must have shape (R, C, K, K) = ({r}, {c}, K, K), got {self.kernels.shape}"
            )
        k = self.kernels.shape[2]
        if self.kernels.shape[3] != k:
            raise ValueError("kernels must be square")
        if k % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {k}")
        if not np.all(np.isfinite(self.kernels)):
            raise ValueError("kernels contain non-finite values")
        sums = self.kernels.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > KERNEL_SUM_TOL):
            worst = float(np.max(np.abs(sums - 1.0)))
            raise ValueError(f"kernels must have unit sum within {KERNEL_SUM_TOL}, worst error {worst:.3e}")

    @property
    def ksize(self) -> int:
        return self.kernels.shape[2]

    def kernel_at(self, row: float, col: float) -> np.ndarray:
        """Normalized bilinear blend of the four anchor kernels around (row, col)."""
        wr = _point_weights(self.anchor_rows, float(row))
        wc = _point_weights(self.anchor_cols, float(col))
        k = np.einsum("r,c,rcij->ij", wr, wc, self.kernels)
        return k / k.sum()

    def weight_maps(self, shape):
        """Per-pixel anchor weights as row (H, R) and column (W, C) factors."""
        h, w = shape[0], shape[1]
        if self.anchor_rows[0] < 0 or self.anchor_rows[-1] > h - 1:
            raise ValueError("anchor rows fall outside the image")
        if self.anchor_cols[0] < 0 or self.anchor_cols[-1] > w - 1:
            raise ValueError("anchor cols fall outside the image")
        return grid_weights(self.anchor_rows, h), grid_weights(self.anchor_cols, w)

    def spectra(self, padded_shape):
        """Cached rfft2 of every anchor kernel embedded in `padded_shape`."""
        key = tuple(padded_shape)
        if key not in self._spectra:
            r, c = self.kernels.shape[:2]
            self._spectra[key] = np.stack(
                [kernel_spectrum(self.kernels[i, j], padded_shape) for i in range(r) for j in range(c)]
            ).reshape(r, c, padded_shape[0], -1)
        return self._spectra[key]

    def flipped(self) -> "PSFField":
        """Field with every kernel rotated 180 degrees (adjoint kernels)."""
        return PSFField(self.anchor_rows, self.anchor_cols, self.kernels[:, :, ::-1, ::-1].copy())

    def save(self, path) -> None:
        write_container(
            path,
            {
                "kind": "psf_field",
                "anchor_rows": self.anchor_rows.tolist(),
                "anchor_cols": self.anchor_cols.tolist(),
                "ksize": int(self.ksize),
            },
            {"kernels": self.kernels},
        )

    @classmethod
    def load(cls, path) -> "PSFField":
        meta, arrays = read_container(path)
        if meta.get("kind") != "psf_field":
            raise ValueError("not a PSF field container")
        kern = arrays["kernels"]
        # renormalize away the float32 narrowing so invariants still hold
        kern = kern / kern.sum(axis=(2, 3), keepdims=True)
        return cls(np.array(meta["anchor_rows"]), np.array(meta["anchor_cols"]), kern)


def _point_weights(anchors: np.ndarray, pos: float) -> np.ndarray:
    w = np.zeros(anchors.size)
    if anchors.size == 1:
        w[0] = 1.0
        return w
    i = int(np.clip(np.searchsorted(anchors, pos, side="right") - 1, 0, anchors.size - 2))
    t = np.clip((pos - anchors[i]) / (anchors[i + 1] - anchors[i]), 0.0, 1.0)
    w[i] = 1.0 - t
    w[i + 1] += t
    return w


def _prep(x: np.ndarray, psfs: PSFField, boundary: str):
    if x.ndim != 2:
        raise ValueError("sv_convolve operates on single-channel images")
    ksz = psfs.ksize
    if ksz > min(x.shape):
        raise ValueError(f"kernel size {ksz} exceeds image extent {min(x.shape)}")
    r = ksz // 2
    mr, mc = _pad_maps(x.shape[0], x.shape[1], r, boundary)
    wr, wc = psfs.weight_maps(x.shape)
    spec = psfs.spectra((len(mr), len(mc)))
    return r, mr, mc, wr, wc, spec


def sv_convolve(x: np.ndarray, psfs: PSFField, mode: str = "scatter", boundary: str = "zero") -> np.ndarray:
    """Spatially varying convolution with bilinearly blended anchor kernels."""
    x = as_image(x)
    if mode not in ("scatter", "gather"):
        raise ValueError(f"mode must be 'scatter' or 'gather', got {mode!r}")
    if psfs.ksize == 1 and np.all(psfs.kernels == 1.0):
        # a field of unit point masses is the identity operator in both modes
        if x.ndim != 2:
            raise ValueError("sv_convolve operates on single-channel images")
        psfs.weight_maps(x.shape)
        return x.copy()
    r, mr, mc, wr, wc, spec = _prep(x, psfs, boundary)
    h, w = x.shape
    out = np.zeros_like(x)
    if mode == "gather":
        xs = np.fft.rfft2(_pad_gather(x, mr, mc))
        for i in range(wr.shape[1]):
            for j in range(wc.shape[1]):
                conv = np.fft.irfft2(xs * spec[i, j], s=(len(mr), len(mc)))[r : r + h, r : r + w]
                out += (wr[:, i][:, None] * wc[:, j][None, :]) * conv
    else:
        for i in range(wr.shape[1]):
            for j in range(wc.shape[1]):
                wx = (wr[:, i][:, None] * wc[:, j][None, :]) * x
                conv = np.fft.irfft2(np.fft.rfft2(_pad_gather(wx, mr, mc)) * spec[i, j], s=(len(mr), len(mc)))
                out += conv[r : r + h, r : r + w]
    return out


def sv_convolve_vjp_x(g: np.ndarray, psfs: PSFField, mode: str = "scatter", boundary: str = "zero") -> np.ndarray:
    """Adjoint of `sv_convolve` in the image argument."""
    g = as_image(g)
    r, mr, mc, wr, wc, spec = _prep(g, psfs, boundary)
    h, w = g.shape
    valid = (mr[:, None] != -1) & (mc[None, :] != -1)
    rows = np.broadcast_to(mr[:, None], valid.shape)[valid]
    cols = np.broadcast_to(mc[None, :], valid.shape)[valid]

    def fold(corr):
        out = np.zeros((h, w))
        np.add.at(out, (rows, cols), corr[valid])
        return out

    xbar = np.zeros_like(g)
    if mode == "scatter":
        # adjoint of sum_a conv(w_a x, k_a) is sum_a w_a * corr(g, k_a)
        gp = np.zeros((len(mr), len(mc)))
        gp[r : r + h, r : r + w] = g
        gs = np.fft.rfft2(gp)
        for i in range(wr.shape[1]):
            for j in range(wc.shape[1]):
                corr = np.fft.irfft2(gs * np.conj(spec[i, j]), s=gp.shape)
                xbar += (wr[:, i][:, None] * wc[:, j][None, :]) * fold(corr)
    else:
        # adjoint of sum_a w_a * conv(x, k_a) is sum_a corr(w_a g, k_a)
        acc = None
        for i in range(wr.shape[1]):
            for j in range(wc.shape[1]):
                wg = (wr[:, i][:, None] * wc[:, j][None, :]) * g
                gp = np.zeros((len(mr), len(mc)))
                gp[r : r + h, r : r + w] = wg
                term = np.fft.rfft2(gp) * np.conj(spec[i, j])
                acc = term if acc is None else acc + term
        xbar = fold(np.fft.irfft2(acc, s=(len(mr), len(mc))))
    return xbar


def sv_convolve_vjp_kernels(
    x: np.ndarray, g: np.ndarray, psfs: PSFField, mode: str = "scatter", boundary: str = "zero"
) -> np.ndarray:
    """Adjoint of `sv_convolve` in the kernel stack; returns (R, C, K, K)."""
    x = as_image(x)
    g = as_image(g)
    r, mr, mc, wr, wc, _ = _prep(x, psfs, boundary)
    h, w = x.shape
    ksz = psfs.ksize
    kbar = np.zeros_like(psfs.kernels)
    gp = np.zeros((len(mr), len(mc)))
    gp[r : r + h, r : r + w] = g
    gs = np.fft.rfft2(gp)
    for i in range(wr.shape[1]):
        for j in range(wc.shape[1]):
            wmap = wr[:, i][:, None] * wc[:, j][None, :]
            if mode == "scatter":
                src = _pad_gather(wmap * x, mr, mc)
                corr = np.fft.irfft2(gs * np.conj(np.fft.rfft2(src)), s=gp.shape)
            else:
                wg = np.zeros((len(mr), len(mc)))
                wg[r : r + h, r : r + w] = wmap * g
                src = _pad_gather(x, mr, mc)
                corr = np.fft.irfft2(np.fft.rfft2(wg) * np.conj(np.fft.rfft2(src)), s=gp.shape)
            # kernel offsets live at corr[u] for u in [-r, r]^2 (circular indexing)
            win = np.roll(corr, (r, r), axis=(0, 1))[: ksz, : ksz]
            kbar[i, j] = win
    return kbar
