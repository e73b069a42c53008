"""Split-step PSF formation and the anchored reference degrade.

A distant on-axis point source arrives as a unit plane wave.  The path is cut
into `screens` equal segments; each segment applies its phase screen and then
a Fresnel step, u <- fresnel(u * exp(j phi)).  At the receiver the circular
aperture masks the field and the focal-plane PSF is the squared magnitude of
its Fourier transform.

`oracle_degrade` runs this at a grid of anchor pixels, each anchor drawing
its screens from an independent child stream keyed by the anchor index (so
anchors can be computed in any order or in parallel).  Every anchor PSF is
split into an integer tilt (its rounded centroid, recorded in the flow field)
and a residual kernel cropped about that centroid, and the image is formed
tilt first, blur second: scatter convolution of the warped image.  PSF
samples map 1:1 onto image pixels at desk scale.
"""

from __future__ import annotations

import numpy as np

from ..imgcore.image import ComplexField, as_image, map_channels
from ..imgcore.psffield import PSFField, sv_convolve
from ..imgcore.rng import RngStream
from ..imgcore.warp import upsample_grid, warp
from .profile import TurbulenceProfile
from .propagate import angular_spectrum_step
from .screens import kolmogorov_screen

PSF_CROP = 33


def pupil_mask(profile: TurbulenceProfile) -> np.ndarray:
    n = profile.grid
    c = (np.arange(n) - n // 2) * profile.dx_m
    r2 = c[:, None] ** 2 + c[None, :] ** 2
    return (r2 <= (profile.d_m / 2.0) ** 2).astype(np.float64)


def split_step_psf(profile: TurbulenceProfile, rng: RngStream) -> np.ndarray:
    """Propagate through the profile's screens; return the unit-sum PSF grid.

    The PSF is centered: with zero turbulence its peak sits at (grid//2,
    grid//2).  Draws `screens` phase screens from `rng` in order.
    """
    n = profile.grid
    u = ComplexField(np.ones((n, n), dtype=np.complex128), profile.dx_m)
    for _ in range(profile.screens):
        phi = kolmogorov_screen(n, profile.dx_m, profile.screen_r0_m, rng)
        u = ComplexField(u.data * np.exp(1j * phi), u.dx)
        u = angular_spectrum_step(u, profile.wavelength_m, profile.dz_m)
    pupil = pupil_mask(profile) * u.data
    focal = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(pupil)))
    h = np.abs(focal) ** 2
    return h / h.sum()


def psf_centroid_full(h: np.ndarray) -> np.ndarray:
    """Centroid of a full-grid PSF relative to the grid center, (row, col)."""
    n = h.shape[0]
    idx = np.arange(n, dtype=np.float64) - n // 2
    s = h.sum()
    return np.array([np.sum(idx[:, None] * h), np.sum(idx[None, :] * h)]) / s


def crop_recentered(h: np.ndarray, crop: int = PSF_CROP):
    """Split a full-grid PSF into (kernel, integer tilt).

    The crop window is centered on the rounded centroid, so the returned
    kernel keeps only the sub-pixel part of the tilt (centroid magnitude
    <= 0.5 sample per axis up to tail truncation) and is renormalized to
    unit sum.
    """
    n = h.shape[0]
    r = crop // 2
    cen = psf_centroid_full(h)
    shift = np.round(cen).astype(int)
    limit = n // 2 - r - 1
    shift = np.clip(shift, -limit, limit)
    r0 = n // 2 + shift[0] - r
    c0 = n // 2 + shift[1] - r
    k = h[r0 : r0 + crop, c0 : c0 + crop].copy()
    k /= k.sum()
    return k, shift.astype(np.float64)


def anchor_grid(shape, rows: int, cols: int):
    """Evenly spaced anchor coordinates spanning an image of `shape`."""
    return (
        np.linspace(0.0, shape[0] - 1.0, int(rows)),
        np.linspace(0.0, shape[1] - 1.0, int(cols)),
    )


def oracle_degrade(
    x: np.ndarray,
    profile: TurbulenceProfile,
    anchors,
    rng: RngStream,
    psf_crop: int = PSF_CROP,
):
    """Reference turbulent degrade; returns (y, PSFField, FlowField).

    `anchors` is either an (n_rows, n_cols) pair of counts or a pair of
    explicit coordinate arrays.  Each anchor's screens come from
    rng.child(anchor_index), so the result does not depend on evaluation
    order.
    """
    x = as_image(x)
    if psf_crop % 2 == 0:
        raise ValueError("psf_crop must be odd")
    ar, ac = anchors
    if np.isscalar(ar):
        ar, ac = anchor_grid(x.shape, int(ar), int(ac))
    ar = np.asarray(ar, dtype=np.float64)
    ac = np.asarray(ac, dtype=np.float64)

    nr, nc = ar.size, ac.size
    kernels = np.empty((nr, nc, psf_crop, psf_crop))
    tilts = np.empty((nr, nc, 2))
    for i in range(nr):
        for j in range(nc):
            h = split_step_psf(profile, rng.child(i * nc + j))
            kernels[i, j], tilts[i, j] = crop_recentered(h, psf_crop)

    field = PSFField(ar, ac, kernels)
    flow = upsample_grid(tilts, ar, ac, x.shape)
    warped = warp(x, flow)
    y = map_channels(lambda ch: sv_convolve(ch, field, mode="scatter"), warped)
    return y, field, flow
