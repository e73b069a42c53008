"""Image containers, convolution, warping, metrics, RNG and file I/O."""

from .convolve import fft_convolve, fft_convolve_adjoint, gaussian_kernel, gaussian_kernel_dsigma
from .image import ComplexField, as_flow, as_image
from .io import load_pfm, load_png, read_container, save_pfm, save_png, write_container
from .metrics import mean_squared_error, psnr
from .psffield import (
    PSFField,
    kernel_centroid,
    kernel_second_moment,
    sv_convolve,
    sv_convolve_vjp_kernels,
    sv_convolve_vjp_x,
)
from .rng import RngStream
from .warp import downsample_grid_adjoint, grid_weights, upsample_grid, warp, warp_vjp

__all__ = [
    "ComplexField",
    "PSFField",
    "RngStream",
    "as_flow",
    "as_image",
    "downsample_grid_adjoint",
    "fft_convolve",
    "fft_convolve_adjoint",
    "gaussian_kernel",
    "gaussian_kernel_dsigma",
    "grid_weights",
    "kernel_centroid",
    "kernel_second_moment",
    "load_pfm",
    "load_png",
    "mean_squared_error",
    "psnr",
    "read_container",
    "save_pfm",
    "save_png",
    "sv_convolve",
    "sv_convolve_vjp_kernels",
    "sv_convolve_vjp_x",
    "upsample_grid",
    "warp",
    "warp_vjp",
    "write_container",
]
