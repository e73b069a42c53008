"""Paraxial angular-spectrum propagation."""

from __future__ import annotations

import numpy as np

from ..imgcore.image import ComplexField


def angular_spectrum_step(field: ComplexField, wavelength: float, dz: float) -> ComplexField:
    """Propagate a field by `dz` with the Fresnel transfer function.

    The spectrum is multiplied by exp(-j pi wavelength dz (fx^2 + fy^2)),
    which is unitary, so energy is conserved to FFT round-off.  Steps longer
    than grid * dx^2 / wavelength alias the quadratic phase and are rejected.
    dz = 0 returns the field unchanged, bit for bit.
    """
    if wavelength <= 0 or not np.isfinite(wavelength):
        raise ValueError("wavelength must be finite and positive")
    if not np.isfinite(dz):
        raise ValueError("dz must be finite")
    if dz == 0.0:
        return ComplexField(field.data.copy(), field.dx)
    zmax = field.grid * field.dx**2 / wavelength
    if abs(dz) > zmax:
        raise ValueError(
            f"step {dz:.4g} m aliases the transfer function; maximum safe |dz| is {zmax:.4g} m"
        )
    f = np.fft.fftfreq(field.grid, field.dx)
    f2 = f[:, None] ** 2 + f[None, :] ** 2
    h = np.exp(-1j * np.pi * wavelength * dz * f2)
    out = np.fft.ifft2(np.fft.fft2(field.data) * h)
    return ComplexField(out, field.dx)
