"""Shift-invariant convolution with explicit boundary handling.

All forward blurs in this package go through `fft_convolve`, which implements
true convolution (out[p] = sum_j k[j] x[p-j]) with a centered odd kernel and
one of three boundary rules: reflect (mirror about the edge pixel, default for
restoration), wrap (circular), zero.  Padding is realized as an explicit index
gather so that `fft_convolve_adjoint` can fold gradients back through the
padding exactly; adjoint pairs hold to FFT round-off, which the restoration
gradients rely on.
"""

from __future__ import annotations

import numpy as np

from .image import map_channels

BOUNDARIES = ("reflect", "wrap", "zero")


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Isotropic Gaussian kernel truncated at +-4 sigma and renormalized.

    sigma = 0 returns the identity kernel [[1]].  An explicit `radius`
    overrides the truncation rule; callers that differentiate through sigma
    pin the radius so the support does not jump.
    """
    sigma = float(sigma)
    if sigma < 0 or not np.isfinite(sigma):
        raise ValueError("sigma must be finite and >= 0")
    if radius is None:
        radius = int(np.ceil(4.0 * sigma)) if sigma > 0 else 0
    radius = int(radius)
    if radius == 0:
        return np.ones((1, 1))
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    if sigma == 0:
        k1 = (r == 0).astype(np.float64)
    else:
        # tiny sigma overflows (r / sigma)**2 to inf; exp(-inf) = 0 is the
        # correct limit, so the warning is noise
        with np.errstate(over="ignore"):
            k1 = np.exp(-0.5 * (r / sigma) ** 2)
    k = np.outer(k1, k1)
    return k / k.sum()


def gaussian_kernel_dsigma(sigma: float, radius: int) -> np.ndarray:
    """Derivative of `gaussian_kernel` with respect to sigma at fixed radius."""
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive to differentiate")
    radius = int(radius)
    if radius == 0:
        return np.zeros((1, 1))
    rr, cc = np.meshgrid(
        np.arange(-radius, radius + 1, dtype=np.float64),
        np.arange(-radius, radius + 1, dtype=np.float64),
        indexing="ij",
    )
    r2 = rr**2 + cc**2
    e = np.exp(-0.5 * r2 / sigma**2)
    s = e.sum()
    de = e * r2 / sigma**3
    # d/dsigma of e/s via quotient rule
    return de / s - e * de.sum() / s**2


def _check_kernel(k: np.ndarray, shape) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square 2-D, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k.shape[0]}")
    if not np.all(np.isfinite(k)):
        raise ValueError("kernel contains non-finite values")
    if k.shape[0] > min(shape[0], shape[1]):
        raise ValueError(
            f"kernel size {k.shape[0]} exceeds image extent {min(shape[0], shape[1])}"
        )
    return k


def _pad_maps(h: int, w: int, r: int, boundary: str):
    """Index maps realizing the pad: padded[i, j] = x[mr[i], mc[j]], -1 = zero."""
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    if r == 0:
        return np.arange(h), np.arange(w)
    if boundary == "zero":
        mr = np.pad(np.arange(h), r, mode="constant", constant_values=-1)
        mc = np.pad(np.arange(w), r, mode="constant", constant_values=-1)
    else:
        mode = "reflect" if boundary == "reflect" else "wrap"
        mr = np.pad(np.arange(h), r, mode=mode)
        mc = np.pad(np.arange(w), r, mode=mode)
    return mr, mc


def kernel_spectrum(k: np.ndarray, padded_shape) -> np.ndarray:
    """rfft2 of the centered kernel embedded in `padded_shape`."""
    ph, pw = padded_shape
    r = k.shape[0] // 2
    kp = np.zeros((ph, pw))
    kp[: k.shape[0], : k.shape[1]] = k
    kp = np.roll(kp, (-r, -r), axis=(0, 1))
    return np.fft.rfft2(kp)


def _pad_gather(x: np.ndarray, mr: np.ndarray, mc: np.ndarray) -> np.ndarray:
    xp = x[np.clip(mr, 0, None)[:, None], np.clip(mc, 0, None)[None, :]]
    if (mr < 0).any() or (mc < 0).any():
        xp = xp * ((mr != -1)[:, None] & (mc != -1)[None, :])
    return xp


def fft_convolve(x: np.ndarray, k: np.ndarray, boundary: str = "reflect") -> np.ndarray:
    """Convolve each channel of `x` with the centered odd kernel `k`."""
    x = np.asarray(x, dtype=np.float64)
    k = _check_kernel(k, x.shape)
    r = k.shape[0] // 2
    mr, mc = _pad_maps(x.shape[0], x.shape[1], r, boundary)
    spec = kernel_spectrum(k, (len(mr), len(mc)))

    def conv2(ch):
        xp = _pad_gather(ch, mr, mc)
        out = np.fft.irfft2(np.fft.rfft2(xp) * spec, s=xp.shape)
        return out[r : r + ch.shape[0], r : r + ch.shape[1]]

    return map_channels(conv2, x)


def fft_convolve_adjoint(g: np.ndarray, k: np.ndarray, boundary: str = "reflect") -> np.ndarray:
    """Adjoint of `fft_convolve` in its image argument.

    For zero boundary this is correlation; for reflect and wrap the mirrored
    or wrapped margins are folded back onto their source pixels.
    """
    g = np.asarray(g, dtype=np.float64)
    k = _check_kernel(k, g.shape)
    r = k.shape[0] // 2
    h, w = g.shape[0], g.shape[1]
    mr, mc = _pad_maps(h, w, r, boundary)
    spec = kernel_spectrum(k, (len(mr), len(mc)))

    valid = (mr[:, None] != -1) & (mc[None, :] != -1)
    rows = np.broadcast_to(mr[:, None], valid.shape)[valid]
    cols = np.broadcast_to(mc[None, :], valid.shape)[valid]

    def adj2(ch):
        gp = np.zeros((len(mr), len(mc)))
        gp[r : r + h, r : r + w] = ch
        corr = np.fft.irfft2(np.fft.rfft2(gp) * np.conj(spec), s=gp.shape)
        out = np.zeros((h, w))
        np.add.at(out, (rows, cols), corr[valid])
        return out

    return map_channels(adj2, g)
