"""Simulator handle exposing the basis-convolution model.

theta for optimization purposes is the beta table alone; the flow rides
along as fixed tilt state, mirroring how the adjoints are defined.  The
handle serializes through JSON (basis included, float64 lossless); the
binary container formats of `BasisSet.save` / `P2SMap.save` are for
standalone artifacts, not for handle round trips.
"""

from __future__ import annotations

import numpy as np

from ..imgcore import as_image
from ..ladder.handles import SimulatorHandle, register_family
from .basis import BasisSet
from .degrade import BetaField, p2s_degrade, p2s_vjp

_WARP_MADDS = 8.0


@register_family
class P2SHandle(SimulatorHandle):
    """Basis-convolution simulator around a concrete coefficient field."""

    family = "p2s"
    differentiable = True
    supports_theta_vjp = True

    def __init__(self, basis: BasisSet, field: BetaField, boundary: str = "zero"):
        if field.n_components != basis.n_components:
            raise ValueError("beta field and basis disagree on the number of components")
        self.basis = basis
        self.field = field
        self.boundary = boundary

    def _check_shape(self, x):
        if x.shape[:2] != self.field.flow.shape[:2]:
            raise ValueError(
                f"image shape {x.shape[:2]} does not match the stored flow {self.field.flow.shape[:2]}"
            )

    def degrade(self, x):
        x = as_image(x)
        self._check_shape(x)
        return p2s_degrade(x, self.field, self.basis, self.boundary)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        xbar, _ = p2s_vjp(x, self.field, self.basis, np.asarray(cotangent, dtype=np.float64), self.boundary)
        return xbar

    def vjp_theta(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        _, betabar = p2s_vjp(x, self.field, self.basis, np.asarray(cotangent, dtype=np.float64), self.boundary)
        return betabar.ravel()

    def theta_vector(self):
        return self.field.beta.ravel().copy()

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.field.beta.size:
            raise ValueError(f"p2s theta must have {self.field.beta.size} entries")
        field = BetaField(
            self.field.anchor_rows,
            self.field.anchor_cols,
            vec.reshape(self.field.beta.shape),
            self.field.flow,
        )
        return P2SHandle(self.basis, field, self.boundary)

    def param_count(self):
        # the full state: coefficients plus the companion tilt flow
        return int(self.field.beta.size + self.field.flow.size)

    def madds_per_pixel(self, shape):
        l = self.basis.n_components
        return _WARP_MADDS + (l + 1) * float(self.basis.ksize) ** 2 + l

    def structure_counts(self, shape) -> dict:
        return {"shift_invariant_convolutions": self.basis.n_components + 1}

    def payload(self):
        return {
            "basis": {
                "components": self.basis.components.tolist(),
                "mean_kernel": self.basis.mean_kernel.tolist(),
                "variance_ratios": self.basis.variance_ratios.tolist(),
            },
            "field": self.field.to_json(),
            "boundary": self.boundary,
        }

    @classmethod
    def from_payload(cls, payload):
        b = payload["basis"]
        basis = BasisSet(
            np.array(b["components"], dtype=np.float64),
            np.array(b["mean_kernel"], dtype=np.float64),
            np.array(b["variance_ratios"], dtype=np.float64),
        )
        return cls(basis, BetaField.from_json(payload["field"]), payload["boundary"])
