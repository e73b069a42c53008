"""PSF synthesis from an aberrated pupil and the phase-model degrade.

The kernel and the tilt are split in the pupil plane: the two tilt
coefficients are zeroed out of the phase before the Fourier transform and
converted to a focal displacement through the basis's fitted tilt slope.
Splitting there (rather than shifting the PSF afterwards) makes a pure-tilt
aberration reproduce the unaberrated kernel exactly, with the whole motion
carried by the flow.  Higher-order modes keep their (sub-pixel scale)
centroid inside the kernel, so the kernel is a continuous function of the
coefficients.
"""

from __future__ import annotations

import numpy as np

from ..imgcore.image import as_image, map_channels
from ..imgcore.psffield import PSFField, sv_convolve
from ..imgcore.warp import upsample_grid, warp
from ..oracle.splitstep import anchor_grid
from .basis import ZernikeBasis
from .covariance import ZernikeCoeffs

PAD_FACTOR = 4
PSF_CROP = 33


def psf_from_phase(alpha_row: np.ndarray, basis: ZernikeBasis, crop: int = PSF_CROP,
                   pad_factor: int = PAD_FACTOR):
    """One anchor's (kernel, tilt) from a row of mode coefficients in radians.

    The focal grid is `pad_factor` times the pupil grid, which puts the first
    diffraction null at 1.22 * pad_factor samples; the default of 4 matches
    the reference simulator's desk geometry, so kernels from both paths live
    on the same sample pitch.  Piston is ignored.
    """
    alpha_row = np.asarray(alpha_row, dtype=np.float64)
    if alpha_row.ndim != 1 or alpha_row.size > basis.n_modes:
        raise ValueError("coefficient row does not match the basis")
    if crop % 2 == 0:
        raise ValueError("crop must be odd")
    k = basis.size
    n_fft = pad_factor * k
    if crop > n_fft:
        raise ValueError("crop exceeds the focal grid")

    resid = alpha_row.copy()
    tilt = np.zeros(2)
    if resid.size >= 3:
        scale = n_fft / (2.0 * np.pi)
        tilt = np.array([resid[2] * basis.tilt_slopes[0], resid[1] * basis.tilt_slopes[1]]) * scale
        resid[1:3] = 0.0
    resid[0] = 0.0

    phase = np.einsum("m,mij->ij", resid, basis.phase_grids[: resid.size])
    pupil = np.zeros((n_fft, n_fft), dtype=np.complex128)
    lo = (n_fft - k) // 2
    pupil[lo : lo + k, lo : lo + k] = np.where(basis.mask, np.exp(1j * phase), 0.0)
    h = np.abs(np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(pupil)))) ** 2
    # crop at the fixed grid center: the kernel keeps whatever sub-pixel
    # centroid the higher-order modes induce, so it varies continuously with
    # the coefficients (a data-dependent recentering would make it jump by
    # whole pixels and poison any smooth fit of coefficients -> kernel)
    r = crop // 2
    c = n_fft // 2
    kernel = h[c - r : c + r + 1, c - r : c + r + 1].copy()
    kernel /= kernel.sum()
    return kernel, tilt


def phase_sim_degrade(
    x: np.ndarray,
    coeffs: ZernikeCoeffs,
    basis: ZernikeBasis,
    anchors,
    crop: int = PSF_CROP,
):
    """Anchor-wise phase-model degrade; returns (y, PSFField, flow).

    Same tilt-then-blur composition as the reference simulator: per-anchor
    tilts upsample to a dense flow, the warped image is blurred by the
    scatter-mode spatially varying convolution.
    """
    x = as_image(x)
    ar, ac = anchors
    if np.isscalar(ar):
        ar, ac = anchor_grid(x.shape, int(ar), int(ac))
    ar = np.asarray(ar, dtype=np.float64)
    ac = np.asarray(ac, dtype=np.float64)
    nr, nc = ar.size, ac.size
    if coeffs.table.shape[0] != nr * nc:
        raise ValueError(
            f"coefficient table has {coeffs.table.shape[0]} anchors, grid needs {nr * nc}"
        )

    kernels = np.empty((nr, nc, crop, crop))
    tilts = np.empty((nr, nc, 2))
    for i in range(nr):
        for j in range(nc):
            kernels[i, j], tilts[i, j] = psf_from_phase(coeffs.table[i * nc + j], basis, crop)

    field = PSFField(ar, ac, kernels)
    flow = upsample_grid(tilts, ar, ac, x.shape)
    warped = warp(x, flow)
    y = map_channels(lambda ch: sv_convolve(ch, field, mode="scatter"), warped)
    return y, field, flow
