"""Per-family state fits against a suite's reference realizations.

Each fit answers: given what the reference simulator actually did to image
i, what is the best state this family can represent?  The procedures are
deliberately structural rather than least-squares-optimal: each family gets
exactly the information its parameterization can express (a jitter model
gets the tilt variance but not the tilt field, a deform model gets the tilt
field at its anchors, kernel families get per-anchor kernels of their own
shape class), so the similarity score measures representational capacity,
not optimizer luck.  Every procedure is recorded on the returned candidate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..imgcore import PSFField, RngStream, gaussian_kernel, upsample_grid
from ..ladder import (
    DeformHandle,
    DeformState,
    IdentityHandle,
    JitterHandle,
    JitterState,
    OracleHandle,
    VaryingHandle,
    deform_flow,
)
from ..oracle import anchor_grid, desk_profile, kolmogorov_screen
from ..p2s import BasisSet, BetaField, P2SHandle, learn_basis
from ..zernike import (
    PhaseHandle,
    ZernikeCoeffs,
    build_basis,
    build_covariance,
    project_phase,
    psf_from_phase,
    sample_alpha,
)
from .suite import Suite

# fitting streams must not collide with the reference simulator's anchor
# children (0 .. n_anchors - 1); any constant far above that works
_FIT_CHILD = 9001


@dataclass
class FittedCandidate:
    """A family fitted to every suite image, with its recorded procedure."""

    candidate_id: str
    family: str
    handles: list
    procedure: str
    suite_hash: str
    complexity_handle: object = dc_field(default=None, repr=False)

    def theta_hash(self) -> str:
        """Digest of every handle's full state, realizations included.

        theta_vector alone is not enough: jitter keeps its noise draw and
        p2s its tilt flow outside theta, and two candidates differing only
        there must not collide.
        """
        h = hashlib.sha256()
        h.update(self.family.encode())
        for handle in self.handles:
            h.update(np.ascontiguousarray(handle.theta_vector(), dtype=np.float64).tobytes())
            for arr in (getattr(handle, "noise", None), getattr(handle, "flow", None)):
                if arr is not None:
                    h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
            fld = getattr(handle, "field", None)
            if fld is not None:
                h.update(np.ascontiguousarray(fld.flow, dtype=np.float64).tobytes())
            seed = getattr(handle, "seed", None)
            if seed is not None:
                h.update(f"{seed},{getattr(handle, 'stream', 0)}".encode())
        return h.hexdigest()


def _kernel_centroid(kernel: np.ndarray) -> np.ndarray:
    k = kernel.shape[0]
    idx = np.arange(k, dtype=np.float64) - k // 2
    s = kernel.sum()
    return np.array([np.sum(idx[:, None] * kernel), np.sum(idx[None, :] * kernel)]) / s


def _sample_flow(flow: np.ndarray, r: float, c: float) -> np.ndarray:
    """Bilinear read of a dense flow at one (row, col) position."""
    r0 = int(np.clip(np.floor(r), 0, flow.shape[0] - 2)) if flow.shape[0] > 1 else 0
    c0 = int(np.clip(np.floor(c), 0, flow.shape[1] - 2)) if flow.shape[1] > 1 else 0
    fr, fc = r - r0, c - c0
    return (
        (1 - fr) * (1 - fc) * flow[r0, c0]
        + (1 - fr) * fc * flow[r0, c0 + 1]
        + fr * (1 - fc) * flow[r0 + 1, c0]
        + fr * fc * flow[r0 + 1, c0 + 1]
    )


def gaussian_sigma_fit(kernel: np.ndarray, lo: float = 0.05, hi: float = 10.0) -> float:
    """Width of the least-squares isotropic Gaussian for a unit-sum kernel.

    Golden-section search on sigma; the Gaussian is rendered on the
    kernel's own support, so heavy tails cost only what the window sees
    (unlike a raw second moment, which power-law tails inflate).
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    radius = kernel.shape[0] // 2

    def cost(sigma: float) -> float:
        g = gaussian_kernel(sigma, radius)
        return float(np.sum((g - kernel) ** 2))

    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = cost(c), cost(d)
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = cost(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = cost(d)
    return 0.5 * (a + b)


def _anchor_tilts(suite: Suite, index: int) -> np.ndarray:
    """Total per-anchor tilt of a realization: integer shift + sub-pixel rest."""
    ar, ac = suite.anchor_coords
    tilts = np.empty((ar.size, ac.size, 2))
    for a in range(ar.size):
        for b in range(ac.size):
            shift = _sample_flow(suite.flows[index], ar[a], ac[b])
            tilts[a, b] = shift + _kernel_centroid(suite.fields[index].kernels[a, b])
    return tilts


def fit_identity(suite: Suite) -> FittedCandidate:
    return FittedCandidate(
        "identity", "identity", [IdentityHandle() for _ in range(suite.count)],
        "no state; passes the observation through", suite.hash,
    )


def fit_oracle(suite: Suite) -> FittedCandidate:
    handles = [
        OracleHandle(suite.profile, suite.anchors, suite.seed, suite.psf_crop, stream=i)
        for i in range(suite.count)
    ]
    return FittedCandidate(
        "oracle", "oracle", handles,
        "reference simulator with the suite's own seeds", suite.hash,
    )


def fit_jitter(suite: Suite) -> FittedCandidate:
    """Tilt variance + one shared Gaussian; the tilt realization is its own."""
    handles = []
    for i in range(suite.count):
        sigma_jitter = float(np.sqrt(np.mean(suite.flows[i] ** 2)))
        sigma_blur = gaussian_sigma_fit(suite.fields[i].kernels.mean(axis=(0, 1)))
        state = JitterState(sigma_jitter, sigma_blur)
        handles.append(
            JitterHandle.sample(state, suite.image_shape, RngStream(suite.seed, i).child(_FIT_CHILD))
        )
    return FittedCandidate(
        "jitter", "jitter", handles,
        "sigma_jitter = rms of the reference tilt field; sigma_blur = least-squares "
        "Gaussian fit of the anchor-mean kernel; fresh iid tilt realization",
        suite.hash,
    )


def fit_deform(suite: Suite) -> FittedCandidate:
    """Reference tilt sampled at the anchor grid + one shared Gaussian."""
    ar, ac = suite.anchor_coords
    handles = []
    for i in range(suite.count):
        disp = np.empty((ar.size, ac.size, 2))
        for a in range(ar.size):
            for b in range(ac.size):
                disp[a, b] = _sample_flow(suite.flows[i], ar[a], ac[b])
        sigma_blur = gaussian_sigma_fit(suite.fields[i].kernels.mean(axis=(0, 1)))
        handles.append(DeformHandle.from_state(DeformState(ar, ac, disp, sigma_blur)))
    return FittedCandidate(
        "deform", "deform", handles,
        "anchor displacements read off the reference tilt field; shared "
        "least-squares Gaussian blur",
        suite.hash,
    )


def fit_varying(suite: Suite) -> FittedCandidate:
    """Reference tilt field + per-anchor Gaussians of fitted width."""
    ar, ac = suite.anchor_coords
    radius = suite.psf_crop // 2
    handles = []
    for i in range(suite.count):
        ks = suite.fields[i].kernels
        fitted = np.empty_like(ks)
        for a in range(ar.size):
            for b in range(ac.size):
                fitted[a, b] = gaussian_kernel(gaussian_sigma_fit(ks[a, b]), radius)
        handles.append(VaryingHandle(PSFField(ar, ac, fitted), suite.flows[i]))
    return FittedCandidate(
        "varying", "varying", handles,
        "reference tilt field verbatim; per-anchor least-squares Gaussian kernels",
        suite.hash,
    )


def fit_phase(suite: Suite, n_modes: int = 36) -> FittedCandidate:
    """Mode coefficients projected from the regenerated screen stack.

    The screens behind each anchor are regenerated from the suite seeds and
    summed (the thin-path approximation of the propagated wavefront), then
    projected onto the mode basis over the aperture window.  Tilt rows are
    replaced by the realization's observable total tilt (anchor shift plus
    the kernel's sub-pixel centroid), expressed in coefficient units, so the
    fitted model reproduces the reference displacement field rather than the
    geometric-limit tilt.
    """
    profile = suite.profile
    p = profile.grid // 4
    basis = build_basis(n_modes, p)
    ar, ac = suite.anchor_coords
    nr, nc = ar.size, ac.size
    lo = profile.grid // 2 - p // 2
    n_fft = 4 * p
    row_scale = 2.0 * np.pi / (n_fft * basis.tilt_slopes[0])
    col_scale = 2.0 * np.pi / (n_fft * basis.tilt_slopes[1])
    handles = []
    for i in range(suite.count):
        rng = RngStream(suite.seed, i)
        tilts = _anchor_tilts(suite, i)
        table = np.empty((nr * nc, n_modes))
        for a in range(nr):
            for b in range(nc):
                child = rng.child(a * nc + b)
                phi = np.zeros((profile.grid, profile.grid))
                for _ in range(profile.screens):
                    phi += kolmogorov_screen(profile.grid, profile.dx_m, profile.screen_r0_m, child)
                alpha = project_phase(phi[lo : lo + p, lo : lo + p], basis)
                alpha[0] = 0.0
                alpha[2] = tilts[a, b, 0] * row_scale
                alpha[1] = tilts[a, b, 1] * col_scale
                table[a * nc + b] = alpha
        coeffs = ZernikeCoeffs(table, profile.d_over_r0)
        handles.append(PhaseHandle(coeffs, (ar, ac), suite.psf_crop, p))
    return FittedCandidate(
        "phase", "phase", handles,
        "higher-order modes projected from the regenerated screen sum over the "
        "aperture; tilt rows set to the realization's total anchor tilt",
        suite.hash,
    )


def fit_p2s_candidate(suite: Suite, basis_set: BasisSet, phase_fit: FittedCandidate | None = None) -> FittedCandidate:
    """Basis-projection of the phase fit: same tilt, kernels through the PCA basis."""
    if phase_fit is None:
        phase_fit = fit_phase(suite)
    if phase_fit.suite_hash != suite.hash:
        raise ValueError("phase fit belongs to a different suite")
    ar, ac = suite.anchor_coords
    nr, nc = ar.size, ac.size
    handles = []
    for i in range(suite.count):
        ph: PhaseHandle = phase_fit.handles[i]
        beta = np.empty((nr, nc, basis_set.n_components))
        tilts = np.empty((nr, nc, 2))
        for a in range(nr):
            for b in range(nc):
                kernel, tilt = psf_from_phase(ph.coeffs.table[a * nc + b], ph.basis, suite.psf_crop)
                beta[a, b] = basis_set.project(kernel)
                tilts[a, b] = tilt
        flow = upsample_grid(tilts, ar, ac, suite.image_shape)
        handles.append(P2SHandle(basis_set, BetaField(ar, ac, beta, flow)))
    return FittedCandidate(
        "p2s", "p2s", handles,
        "kernels of the phase fit projected onto the learned kernel basis; "
        "same realization tilt field",
        suite.hash,
    )


def suite_kernel_basis(
    suite: Suite, n_samples: int = 1200, n_components: int = 100, seed: int = 31
) -> BasisSet:
    """Kernel basis learned at the suite's own pupil geometry and strength."""
    p = suite.profile.grid // 4
    basis = build_basis(36, p)
    center = np.array([suite.image_shape[0] / 2.0])
    cov = build_covariance(suite.profile.d_over_r0, (center, center), 16.0, 36)
    rng = RngStream(int(seed), 0)
    kernels = np.empty((n_samples, suite.psf_crop, suite.psf_crop))
    for i in range(n_samples):
        alpha = sample_alpha(cov, rng.child(i)).table[0]
        kernels[i] = psf_from_phase(alpha, basis, suite.psf_crop)[0]
    return learn_basis(kernels, n_components)


def fitted_flow(handle) -> np.ndarray | None:
    """The dense displacement field a fitted handle applies, if it has one."""
    if isinstance(handle, JitterHandle):
        return handle.state.sigma_jitter * handle.noise
    if isinstance(handle, DeformHandle):
        return deform_flow(handle.state, (int(handle.state.anchor_rows[-1] + 1),
                                          int(handle.state.anchor_cols[-1] + 1)))
    if isinstance(handle, (VaryingHandle,)):
        return handle.flow
    if isinstance(handle, P2SHandle):
        return handle.field.flow
    if isinstance(handle, PhaseHandle):
        nr, nc = handle.anchor_rows.size, handle.anchor_cols.size
        tilts = np.empty((nr, nc, 2))
        for a in range(nr):
            for b in range(nc):
                _, tilts[a, b] = psf_from_phase(
                    handle.coeffs.table[a * nc + b], handle.basis, handle.crop
                )
        shape = (int(handle.anchor_rows[-1] + 1), int(handle.anchor_cols[-1] + 1))
        return upsample_grid(tilts, handle.anchor_rows, handle.anchor_cols, shape)
    return None


def fitted_kernels(handle, crop: int) -> np.ndarray | None:
    """Per-anchor kernels of a fitted handle on a (nr, nc, crop, crop) grid."""
    radius = crop // 2
    if isinstance(handle, JitterHandle):
        return gaussian_kernel(handle.state.sigma_blur, radius)[None, None]
    if isinstance(handle, DeformHandle):
        return gaussian_kernel(handle.state.sigma_blur, radius)[None, None]
    if isinstance(handle, VaryingHandle):
        return handle.psfs.kernels
    if isinstance(handle, P2SHandle):
        beta = handle.field.beta
        rec = handle.basis.reconstruct(beta.reshape(-1, beta.shape[-1]))
        rec = np.maximum(rec, 0.0)
        rec /= rec.sum(axis=(-2, -1), keepdims=True)
        return rec.reshape(beta.shape[:2] + rec.shape[-2:])
    if isinstance(handle, PhaseHandle):
        nr, nc = handle.anchor_rows.size, handle.anchor_cols.size
        out = np.empty((nr, nc, crop, crop))
        for a in range(nr):
            for b in range(nc):
                out[a, b] = psf_from_phase(
                    handle.coeffs.table[a * nc + b], handle.basis, crop
                )[0]
        return out
    return None


def standard_complexity_handle(family: str, basis_set: BasisSet | None = None,
                               image_size: int = 256, seed: int = 2030):
    """A representative instance of a family at the standard timing size.

    State values are arbitrary but fixed; wall-clock depends on structure
    (anchor counts, kernel sizes, component counts), not on the values.
    """
    shape = (int(image_size), int(image_size))
    rng = RngStream(int(seed), 0)
    ar, ac = anchor_grid(shape, 8, 8)
    if family == "identity":
        return IdentityHandle()
    if family == "jitter":
        return JitterHandle.sample(JitterState(1.0, 1.5), shape, rng.child(1))
    if family == "deform":
        disp = rng.child(2).standard_normal((8, 8, 2))
        return DeformHandle.from_state(DeformState(ar, ac, disp, 1.5))
    if family == "varying":
        sig = 1.0 + rng.child(3).uniform(size=(8, 8))
        kernels = np.stack([
            np.stack([gaussian_kernel(sig[a, b], 16) for b in range(8)]) for a in range(8)
        ])
        flow = rng.child(4).standard_normal((shape[0], shape[1], 2))
        return VaryingHandle(PSFField(ar, ac, kernels), flow)
    if family == "p2s":
        if basis_set is None:
            raise ValueError("the p2s complexity handle needs a kernel basis")
        beta = 0.01 * rng.child(5).standard_normal((8, 8, basis_set.n_components))
        flow = rng.child(6).standard_normal((shape[0], shape[1], 2))
        return P2SHandle(basis_set, BetaField(ar, ac, beta, flow))
    if family == "phase":
        cov = build_covariance(4.0, (np.array([shape[0] / 2.0]), np.array([shape[1] / 2.0])), 16.0, 36)
        table = np.vstack([sample_alpha(cov, rng.child(100 + i)).table[0] for i in range(64)])
        return PhaseHandle(ZernikeCoeffs(table, 4.0), (ar, ac), 33, basis_size=image_size // 2)
    if family == "oracle":
        return OracleHandle(desk_profile(image_size, 4.0, 5), (8, 8), int(seed))
    raise ValueError(f"no standard complexity instance for family {family!r}")
