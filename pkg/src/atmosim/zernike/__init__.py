"""Zernike mode machinery: basis, turbulence statistics, phase-model degrade."""

from .basis import (
    ZernikeBasis,
    build_basis,
    noll_to_nm,
    project_phase,
    symmetry_maps,
    zernike_grid,
)
from .covariance import (
    CoeffCovariance,
    ZernikeCoeffs,
    build_covariance,
    noll_covariance,
    sample_alpha,
)
from .handles import PhaseHandle
from .phasesim import PAD_FACTOR, PSF_CROP, phase_sim_degrade, psf_from_phase

__all__ = [
    "ZernikeBasis",
    "build_basis",
    "noll_to_nm",
    "project_phase",
    "symmetry_maps",
    "zernike_grid",
    "CoeffCovariance",
    "ZernikeCoeffs",
    "build_covariance",
    "noll_covariance",
    "sample_alpha",
    "PhaseHandle",
    "PAD_FACTOR",
    "PSF_CROP",
    "phase_sim_degrade",
    "psf_from_phase",
]
