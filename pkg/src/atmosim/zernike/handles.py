"""The phase-model simulator behind the common handle contract.

The state is the per-anchor mode coefficient table.  Kernels come from
squared Fourier magnitudes of the aberrated pupil, so no adjoint is wired
up and the handle truthfully claims non-differentiability; the fast
basis-convolution family is the differentiable stand-in for this model.
"""

from __future__ import annotations

import numpy as np

from ..ladder import SimulatorHandle, register_family
from .basis import build_basis
from .covariance import ZernikeCoeffs
from .phasesim import PSF_CROP, phase_sim_degrade


@register_family
class PhaseHandle(SimulatorHandle):
    """Anchor-wise Zernike phase simulator; theta = the coefficient table."""

    family = "phase"
    differentiable = False
    supports_theta_vjp = False

    def __init__(self, coeffs: ZernikeCoeffs, anchors, crop: int = PSF_CROP,
                 basis_size: int = 64):
        ar, ac = anchors
        self.anchor_rows = np.asarray(ar, dtype=np.float64)
        self.anchor_cols = np.asarray(ac, dtype=np.float64)
        if coeffs.table.shape[0] != self.anchor_rows.size * self.anchor_cols.size:
            raise ValueError("coefficient table does not match the anchor grid")
        self.coeffs = coeffs
        self.crop = int(crop)
        self.basis = build_basis(coeffs.table.shape[1], basis_size)

    def degrade(self, x):
        y, _, _ = phase_sim_degrade(
            x, self.coeffs, self.basis, (self.anchor_rows, self.anchor_cols), self.crop
        )
        return y

    def theta_vector(self):
        return self.coeffs.table.ravel().copy()

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.coeffs.table.size:
            raise ValueError(f"phase theta must have {self.coeffs.table.size} entries")
        coeffs = ZernikeCoeffs(vec.reshape(self.coeffs.table.shape), self.coeffs.d_over_r0)
        return PhaseHandle(
            coeffs, (self.anchor_rows, self.anchor_cols), self.crop, self.basis.size
        )

    def madds_per_pixel(self, shape):
        # per anchor: mode synthesis plus one padded FFT, amortized over pixels
        n_fft = 4.0 * self.basis.size
        per_anchor = self.coeffs.table.shape[1] * self.basis.size**2
        per_anchor += 6.0 * n_fft * n_fft * np.log2(n_fft)
        blend = float(self.crop) ** 2 * self.coeffs.table.shape[0]
        return (per_anchor * self.coeffs.table.shape[0] + 8.0 * shape[0] * shape[1]
                + blend) / float(shape[0] * shape[1])

    def payload(self):
        return {
            "table": self.coeffs.table.tolist(),
            "d_over_r0": self.coeffs.d_over_r0,
            "anchor_rows": self.anchor_rows.tolist(),
            "anchor_cols": self.anchor_cols.tolist(),
            "crop": self.crop,
            "basis_size": self.basis.size,
        }

    @classmethod
    def from_payload(cls, payload):
        coeffs = ZernikeCoeffs(
            np.array(payload["table"], dtype=np.float64), payload["d_over_r0"]
        )
        return cls(
            coeffs,
            (np.array(payload["anchor_rows"]), np.array(payload["anchor_cols"])),
            payload["crop"],
            payload["basis_size"],
        )
