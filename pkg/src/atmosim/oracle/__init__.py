"""Split-step wave propagation through Kolmogorov phase screens."""

from .profile import TurbulenceProfile, desk_profile
from .propagate import angular_spectrum_step
from .screens import (
    estimate_structure_function,
    kolmogorov_screen,
    phase_psd,
    theoretical_structure_function,
)
from .splitstep import (
    PSF_CROP,
    anchor_grid,
    crop_recentered,
    oracle_degrade,
    psf_centroid_full,
    pupil_mask,
    split_step_psf,
)

__all__ = [
    "PSF_CROP",
    "TurbulenceProfile",
    "anchor_grid",
    "angular_spectrum_step",
    "crop_recentered",
    "desk_profile",
    "estimate_structure_function",
    "kolmogorov_screen",
    "oracle_degrade",
    "phase_psd",
    "psf_centroid_full",
    "pupil_mask",
    "split_step_psf",
    "theoretical_structure_function",
]
