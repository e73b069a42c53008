"""One common contract for every degradation simulator in the package.

A handle bundles a family tag, a state vector theta, truthful capability
flags, and a deterministic `degrade`.  Stochastic families are realized at
construction time (the noise draw is stored on the handle), so repeated
calls with the same handle produce identical output, differentiation with
respect to theta is well defined, and serialization can round-trip the whole
degradation bit for bit.

Capability flags are promises that the evaluation harness checks against
finite differences:

differentiable      `vjp_x(x, cot)` returns the exact adjoint of the
                    linearized degrade in its image argument.
supports_theta_vjp  `vjp_theta(x, cot)` returns the gradient with respect
                    to `theta_vector()`, and `with_theta` rebuilds a handle
                    at a new state.

Handles serialize to JSON dicts under a ``"family"`` discriminator;
`deserialize_handle` restores any registered family.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..imgcore import (
    PSFField,
    RngStream,
    as_image,
    downsample_grid_adjoint,
    fft_convolve,
    fft_convolve_adjoint,
    gaussian_kernel,
    gaussian_kernel_dsigma,
    sv_convolve,
    sv_convolve_vjp_x,
    warp,
    warp_vjp,
)
from ..imgcore.image import map_channels
from ..oracle import TurbulenceProfile, oracle_degrade
from .degrade import DEGRADE_BOUNDARY, blur_shared, deform_flow, flipped_degrade, varying_degrade
from .states import DeformState, JitterState

_FAMILIES: dict[str, type] = {}


def register_family(cls):
    """Class decorator adding a handle type to the deserialization registry."""
    if not cls.family:
        raise ValueError("handle class must set a family tag")
    _FAMILIES[cls.family] = cls
    return cls


def deserialize_handle(doc: dict) -> "SimulatorHandle":
    """Rebuild a handle from `SimulatorHandle.serialize` output."""
    family = doc.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown simulator family {family!r}")
    return _FAMILIES[family].from_payload(doc["theta"])


def registered_families():
    return tuple(sorted(_FAMILIES))


class SimulatorHandle:
    """Base simulator contract; see the module docstring for the semantics."""

    family: str = ""
    differentiable: bool = False
    supports_theta_vjp: bool = False

    def degrade(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp_x(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        raise ValueError(f"the {self.family} simulator does not expose an image adjoint")

    def vjp_theta(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        raise ValueError(f"the {self.family} simulator does not expose a state adjoint")

    def theta_vector(self) -> np.ndarray:
        return np.zeros(0)

    def with_theta(self, vec: np.ndarray) -> "SimulatorHandle":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != 0:
            raise ValueError(f"the {self.family} simulator has no adjustable state")
        return self

    def theta_lower_bounds(self) -> np.ndarray:
        return np.full(self.theta_vector().size, -np.inf)

    def theta_upper_bounds(self) -> np.ndarray:
        return np.full(self.theta_vector().size, np.inf)

    def param_count(self) -> int:
        return int(self.theta_vector().size)

    def madds_per_pixel(self, shape) -> float:
        """Declared-structure multiply-add estimate per output pixel."""
        return 0.0

    def structure_counts(self, shape) -> dict:
        """Named structural counts (e.g. convolutions) for complexity reports."""
        return {}

    def payload(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_payload(cls, payload: dict) -> "SimulatorHandle":
        raise NotImplementedError

    def serialize(self) -> dict:
        return {"family": self.family, "theta": self.payload()}


# bilinear warp: 4 taps, ~2 madds each
_WARP_MADDS = 8.0


@register_family
@dataclass(frozen=True)
class IdentityHandle(SimulatorHandle):
    """The do-nothing simulator; useful as a baseline and in sanity tests."""

    family = "identity"
    differentiable = True
    supports_theta_vjp = False

    def degrade(self, x):
        return as_image(x).copy()

    def vjp_x(self, x, cotangent):
        return np.asarray(cotangent, dtype=np.float64).copy()

    def payload(self):
        return {}

    @classmethod
    def from_payload(cls, payload):
        return cls()


def _pin_radius(sigma_blur: float) -> int:
    return int(np.ceil(4.0 * float(sigma_blur))) if sigma_blur > 0 else 0


@register_family
@dataclass(frozen=True)
class JitterHandle(SimulatorHandle):
    """Pixel-jitter simulator with a frozen unit-normal flow realization.

    theta = (sigma_jitter, sigma_blur).  The stored `noise` is the unit
    draw; the applied flow is sigma_jitter * noise, which keeps degrade
    smooth in theta.  The blur kernel radius is pinned at construction so
    the kernel support cannot jump while theta is being optimized.
    """

    state: JitterState
    noise: np.ndarray
    blur_radius: int
    boundary: str = DEGRADE_BOUNDARY

    family = "jitter"
    differentiable = True
    supports_theta_vjp = True

    def __post_init__(self):
        noise = np.asarray(self.noise, dtype=np.float64)
        if noise.ndim != 3 or noise.shape[2] != 2:
            raise ValueError("noise must have shape (H, W, 2)")
        if not np.all(np.isfinite(noise)):
            raise ValueError("noise must be finite")
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "blur_radius", int(self.blur_radius))

    @classmethod
    def sample(cls, state: JitterState, shape, rng: RngStream, boundary: str = DEGRADE_BOUNDARY):
        """Draw the flow realization for images of the given shape."""
        noise = rng.standard_normal((int(shape[0]), int(shape[1]), 2))
        return cls(state, noise, _pin_radius(state.sigma_blur), boundary)

    def _flow(self):
        return self.state.sigma_jitter * self.noise

    def _check_shape(self, x):
        if x.shape[:2] != self.noise.shape[:2]:
            raise ValueError(
                f"image shape {x.shape[:2]} does not match the realized flow {self.noise.shape[:2]}"
            )

    def degrade(self, x):
        x = as_image(x)
        self._check_shape(x)
        return blur_shared(warp(x, self._flow()), self.state.sigma_blur, self.boundary, self.blur_radius)

    def _blur_adjoint(self, cotangent):
        cotangent = np.asarray(cotangent, dtype=np.float64)
        if self.blur_radius == 0:
            return cotangent
        k = gaussian_kernel(self.state.sigma_blur, self.blur_radius)
        return fft_convolve_adjoint(cotangent, k, self.boundary)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        xbar, _ = warp_vjp(x, self._flow(), self._blur_adjoint(cotangent))
        return xbar

    def vjp_theta(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        cotangent = np.asarray(cotangent, dtype=np.float64)
        flow = self._flow()
        xgrad_in = self._blur_adjoint(cotangent)
        _, flowbar = warp_vjp(x, flow, xgrad_in)
        g_jitter = float(np.sum(flowbar * self.noise))
        g_blur = 0.0
        if self.blur_radius > 0 and self.state.sigma_blur > 0:
            dk = gaussian_kernel_dsigma(self.state.sigma_blur, self.blur_radius)
            g_blur = float(np.sum(cotangent * fft_convolve(warp(x, flow), dk, self.boundary)))
        return np.array([g_jitter, g_blur])

    def theta_vector(self):
        return np.array([self.state.sigma_jitter, self.state.sigma_blur])

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (2,):
            raise ValueError("jitter theta is (sigma_jitter, sigma_blur)")
        return replace(self, state=JitterState(vec[0], vec[1]))

    def theta_lower_bounds(self):
        return np.zeros(2)

    def madds_per_pixel(self, shape):
        return _WARP_MADDS + float(2 * self.blur_radius + 1) ** 2

    def payload(self):
        return {
            "sigma_jitter": self.state.sigma_jitter,
            "sigma_blur": self.state.sigma_blur,
            "blur_radius": self.blur_radius,
            "boundary": self.boundary,
            "noise": self.noise.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            JitterState(payload["sigma_jitter"], payload["sigma_blur"]),
            np.array(payload["noise"], dtype=np.float64),
            payload["blur_radius"],
            payload["boundary"],
        )


@register_family
@dataclass(frozen=True)
class DeformHandle(SimulatorHandle):
    """Deformable-grid simulator; theta = anchor displacements + sigma_blur."""

    state: DeformState
    blur_radius: int
    boundary: str = DEGRADE_BOUNDARY

    family = "deform"
    differentiable = True
    supports_theta_vjp = True

    def __post_init__(self):
        object.__setattr__(self, "blur_radius", int(self.blur_radius))

    @classmethod
    def from_state(cls, state: DeformState, boundary: str = DEGRADE_BOUNDARY):
        return cls(state, _pin_radius(state.sigma_blur), boundary)

    def _check_anchors(self, shape):
        if self.state.anchor_rows[0] < 0 or self.state.anchor_rows[-1] > shape[0] - 1:
            raise ValueError("anchor rows fall outside the image")
        if self.state.anchor_cols[0] < 0 or self.state.anchor_cols[-1] > shape[1] - 1:
            raise ValueError("anchor cols fall outside the image")

    def degrade(self, x):
        x = as_image(x)
        self._check_anchors(x.shape)
        flow = deform_flow(self.state, x.shape)
        return blur_shared(warp(x, flow), self.state.sigma_blur, self.boundary, self.blur_radius)

    def _blur_adjoint(self, cotangent):
        cotangent = np.asarray(cotangent, dtype=np.float64)
        if self.blur_radius == 0:
            return cotangent
        k = gaussian_kernel(self.state.sigma_blur, self.blur_radius)
        return fft_convolve_adjoint(cotangent, k, self.boundary)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_anchors(x.shape)
        flow = deform_flow(self.state, x.shape)
        xbar, _ = warp_vjp(x, flow, self._blur_adjoint(cotangent))
        return xbar

    def vjp_theta(self, x, cotangent):
        x = as_image(x)
        self._check_anchors(x.shape)
        cotangent = np.asarray(cotangent, dtype=np.float64)
        flow = deform_flow(self.state, x.shape)
        _, flowbar = warp_vjp(x, flow, self._blur_adjoint(cotangent))
        dispbar = downsample_grid_adjoint(flowbar, self.state.anchor_rows, self.state.anchor_cols)
        g_blur = 0.0
        if self.blur_radius > 0 and self.state.sigma_blur > 0:
            dk = gaussian_kernel_dsigma(self.state.sigma_blur, self.blur_radius)
            g_blur = float(np.sum(cotangent * fft_convolve(warp(x, flow), dk, self.boundary)))
        return np.concatenate([dispbar.ravel(), [g_blur]])

    def theta_vector(self):
        return np.concatenate([self.state.displacements.ravel(), [self.state.sigma_blur]])

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        r, c = self.state.grid_shape
        if vec.shape != (2 * r * c + 1,):
            raise ValueError(f"deform theta must have {2 * r * c + 1} entries")
        state = DeformState(
            self.state.anchor_rows, self.state.anchor_cols, vec[:-1].reshape(r, c, 2), vec[-1]
        )
        return replace(self, state=state)

    def theta_lower_bounds(self):
        lo = np.full(self.theta_vector().size, -np.inf)
        lo[-1] = 0.0
        return lo

    def madds_per_pixel(self, shape):
        # upsampling the flow costs 4 taps per component on top of the warp
        return _WARP_MADDS + 8.0 + float(2 * self.blur_radius + 1) ** 2

    def payload(self):
        return {
            "anchor_rows": self.state.anchor_rows.tolist(),
            "anchor_cols": self.state.anchor_cols.tolist(),
            "displacements": self.state.displacements.tolist(),
            "sigma_blur": self.state.sigma_blur,
            "blur_radius": self.blur_radius,
            "boundary": self.boundary,
        }

    @classmethod
    def from_payload(cls, payload):
        state = DeformState(
            np.array(payload["anchor_rows"], dtype=np.float64),
            np.array(payload["anchor_cols"], dtype=np.float64),
            np.array(payload["displacements"], dtype=np.float64),
            payload["sigma_blur"],
        )
        return cls(state, payload["blur_radius"], payload["boundary"])


class _FieldHandle(SimulatorHandle):
    """Shared plumbing for the two kernel-field simulators."""

    def __init__(self, psfs: PSFField, flow: np.ndarray, boundary: str = DEGRADE_BOUNDARY):
        flow = np.asarray(flow, dtype=np.float64)
        if flow.ndim != 3 or flow.shape[2] != 2:
            raise ValueError("flow must have shape (H, W, 2)")
        self.psfs = psfs
        self.flow = flow
        self.boundary = boundary

    def _check_shape(self, x):
        if x.shape[:2] != self.flow.shape[:2]:
            raise ValueError(
                f"image shape {x.shape[:2]} does not match the stored flow {self.flow.shape[:2]}"
            )

    def theta_vector(self):
        return np.concatenate([self.psfs.kernels.ravel(), self.flow.ravel()])

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        nk = self.psfs.kernels.size
        if vec.size != nk + self.flow.size:
            raise ValueError("theta length does not match the kernel stack plus flow")
        psfs = PSFField(
            self.psfs.anchor_rows, self.psfs.anchor_cols, vec[:nk].reshape(self.psfs.kernels.shape)
        )
        return type(self)(psfs, vec[nk:].reshape(self.flow.shape), self.boundary)

    def madds_per_pixel(self, shape):
        r, c = self.psfs.kernels.shape[:2]
        return _WARP_MADDS + float(r * c) * float(self.psfs.ksize) ** 2

    def payload(self):
        return {
            "anchor_rows": self.psfs.anchor_rows.tolist(),
            "anchor_cols": self.psfs.anchor_cols.tolist(),
            "kernels": self.psfs.kernels.tolist(),
            "flow": self.flow.tolist(),
            "boundary": self.boundary,
        }

    @classmethod
    def from_payload(cls, payload):
        psfs = PSFField(
            np.array(payload["anchor_rows"], dtype=np.float64),
            np.array(payload["anchor_cols"], dtype=np.float64),
            np.array(payload["kernels"], dtype=np.float64),
        )
        return cls(psfs, np.array(payload["flow"], dtype=np.float64), payload["boundary"])


@register_family
class VaryingHandle(_FieldHandle):
    """Tilt-then-blur simulator around a concrete kernel field and flow."""

    family = "varying"
    differentiable = True
    supports_theta_vjp = False

    def degrade(self, x):
        x = as_image(x)
        self._check_shape(x)
        return varying_degrade(x, self.psfs, self.flow, self.boundary)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        cot = np.asarray(cotangent, dtype=np.float64)
        sbar = map_channels(lambda ch: sv_convolve_vjp_x(ch, self.psfs, "scatter", self.boundary), cot)
        xbar, _ = warp_vjp(x, self.flow, sbar)
        return xbar


@register_family
class FlippedHandle(_FieldHandle):
    """Blur-then-tilt variant of `VaryingHandle` (the swapped order)."""

    family = "flipped"
    differentiable = True
    supports_theta_vjp = False

    def degrade(self, x):
        x = as_image(x)
        self._check_shape(x)
        return flipped_degrade(x, self.psfs, self.flow, self.boundary)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        blurred = map_channels(lambda ch: sv_convolve(ch, self.psfs, "scatter", self.boundary), x)
        zbar, _ = warp_vjp(blurred, self.flow, np.asarray(cotangent, dtype=np.float64))
        return map_channels(lambda ch: sv_convolve_vjp_x(ch, self.psfs, "scatter", self.boundary), zbar)


@register_family
@dataclass(frozen=True)
class OracleHandle(SimulatorHandle):
    """Anchored split-step reference behind the common contract.

    Not differentiable: intensities come from squared FFT magnitudes of
    random phase screens, and no adjoint is available.  Deterministic all
    the same, because the stream seed is part of the stored state.
    """

    profile: TurbulenceProfile
    anchors: tuple
    seed: int
    psf_crop: int = 33
    stream: int = 0

    family = "oracle"
    differentiable = False
    supports_theta_vjp = False

    def __post_init__(self):
        object.__setattr__(self, "anchors", (int(self.anchors[0]), int(self.anchors[1])))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "psf_crop", int(self.psf_crop))
        object.__setattr__(self, "stream", int(self.stream))

    def degrade(self, x):
        return self.degrade_full(x)[0]

    def degrade_full(self, x):
        """Run the reference simulator and keep its PSF field and flow."""
        return oracle_degrade(
            x, self.profile, self.anchors, RngStream(self.seed, self.stream), self.psf_crop
        )

    def theta_vector(self):
        p = self.profile
        return np.array(
            [p.d_m, p.wavelength_m, p.path_m, p.r0_m, p.screens, p.grid, p.dx_m, *self.anchors]
        )

    def madds_per_pixel(self, shape):
        # per anchor: `screens` split steps, each a few grid-sized FFTs
        g = float(self.profile.grid)
        ffts = self.anchors[0] * self.anchors[1] * (self.profile.screens + 1) * 6.0
        return ffts * g * g * np.log2(g) / float(shape[0] * shape[1])

    def payload(self):
        p = self.profile
        return {
            "d_m": p.d_m,
            "wavelength_m": p.wavelength_m,
            "path_m": p.path_m,
            "r0_m": p.r0_m,
            "screens": p.screens,
            "grid": p.grid,
            "dx_m": p.dx_m,
            "anchors": list(self.anchors),
            "seed": self.seed,
            "psf_crop": self.psf_crop,
            "stream": self.stream,
        }

    @classmethod
    def from_payload(cls, payload):
        profile = TurbulenceProfile(
            d_m=payload["d_m"],
            wavelength_m=payload["wavelength_m"],
            path_m=payload["path_m"],
            r0_m=payload["r0_m"],
            screens=payload["screens"],
            grid=payload["grid"],
            dx_m=payload["dx_m"],
        )
        return cls(
            profile,
            tuple(payload["anchors"]),
            payload["seed"],
            payload["psf_crop"],
            payload.get("stream", 0),
        )
