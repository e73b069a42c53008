"""Noll-indexed Zernike modes on a discrete pupil.

Grids are orthonormalized under the raw pixel dot product (sum over the
pupil support), so mode 1 is the constant 1/sqrt(n_pupil).  Coefficients in
radians follow the usual convention of unit RMS over the pupil, which is the
raw-orthonormal grid scaled by sqrt(n_pupil); `ZernikeBasis.phase_grids`
exposes that scaling so a phase map is just an einsum with a coefficient row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def noll_to_nm(j: int):
    """Map a Noll index j >= 1 to (n, m, parity) with parity in {"cos", "sin", ""}."""
    if j < 1:
        raise ValueError("Noll indices start at 1")
    n = 0
    while j > (n + 1) * (n + 2) // 2:
        n += 1
    k = j - n * (n + 1) // 2  # 1-based position within the n row
    if n % 2 == 0:
        m = 2 * (k // 2)
    else:
        m = 2 * ((k - 1) // 2) + 1
    if m == 0:
        return n, 0, ""
    return n, m, "cos" if j % 2 == 0 else "sin"


def _radial(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in range((n - m) // 2 + 1):
        c = (
            (-1) ** k
            * math.factorial(n - k)
            / (
                math.factorial(k)
                * math.factorial((n + m) // 2 - k)
                * math.factorial((n - m) // 2 - k)
            )
        )
        out += c * rho ** (n - 2 * k)
    return out


def zernike_grid(j: int, size: int) -> np.ndarray:
    """Mode j sampled on a size x size grid, zero outside the inscribed disk.

    Uses the continuous normalization (unit RMS over the disk); rows are the
    y axis and columns the x axis, with theta measured from +x.  cos(m theta)
    and sin(m theta) are built algebraically from x/rho and y/rho so that the
    grid's reflection parities hold bit-exactly.
    """
    c = (np.arange(size) - (size - 1) / 2.0) / (size / 2.0)
    y = c[:, None]
    x = c[None, :]
    rho = np.hypot(x, y)
    mask = rho <= 1.0
    n, m, parity = noll_to_nm(j)
    r = _radial(n, m, np.where(mask, rho, 0.0))
    if m == 0:
        z = math.sqrt(n + 1.0) * r
    else:
        safe = np.where(rho > 0.0, rho, 1.0)
        cos_t, sin_t = x / safe, y / safe
        cos_m, sin_m = cos_t.copy(), sin_t.copy()
        for _ in range(m - 1):
            cos_m, sin_m = cos_m * cos_t - sin_m * sin_t, sin_m * cos_t + cos_m * sin_t
        trig = cos_m if parity == "cos" else sin_m
        z = math.sqrt(2.0 * (n + 1.0)) * r * trig
    return np.where(mask, z, 0.0)


@dataclass
class ZernikeBasis:
    """Orthonormal mode stack over a discrete pupil.

    grids : (n_modes, size, size), raw-dot orthonormal, zero off the pupil.
    mask : boolean pupil support.
    tilt_slopes : mean phase-grid gradient of modes 3 and 2 over the pupil,
        (d/drow of mode 3, d/dcol of mode 2) in radians per sample; converts
        tilt coefficients to focal-plane displacement.
    """

    grids: np.ndarray
    mask: np.ndarray
    tilt_slopes: np.ndarray
    _phase_grids: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_modes(self) -> int:
        return self.grids.shape[0]

    @property
    def size(self) -> int:
        return self.grids.shape[1]

    @property
    def n_pupil(self) -> int:
        return int(self.mask.sum())

    @property
    def phase_grids(self) -> np.ndarray:
        """Unit-RMS-over-pupil mode grids: multiply by radians coefficients."""
        if self._phase_grids is None:
            self._phase_grids = self.grids * np.sqrt(self.n_pupil)
        return self._phase_grids


def build_basis(n_modes: int, size: int = 64) -> ZernikeBasis:
    """Evaluate and discretely orthonormalize the first `n_modes` Noll modes.

    Modified Gram-Schmidt against the raw pixel dot product; projections
    below 1e-12 are skipped so modes of different parity never mix and exact
    grid symmetries survive.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if size < 16:
        raise ValueError("pupil grid must be at least 16 samples")
    c = (np.arange(size) - (size - 1) / 2.0) / (size / 2.0)
    mask = np.hypot(c[:, None], c[None, :]) <= 1.0
    sup = np.where(mask.ravel())[0]
    if n_modes > sup.size // 4:
        raise ValueError(f"{n_modes} modes cannot be resolved on {sup.size} pupil samples")

    q = np.empty((n_modes, sup.size))
    for j in range(1, n_modes + 1):
        v = zernike_grid(j, size).ravel()[sup]
        scale = np.linalg.norm(v)
        for i in range(j - 1):
            proj = q[i] @ v
            if abs(proj) > 1e-12 * scale:
                v = v - proj * q[i]
        nrm = np.linalg.norm(v)
        if nrm < 1e-8 * scale:
            raise ValueError(f"mode {j} is numerically dependent on lower modes at size {size}")
        q[j - 1] = v / nrm

    grids = np.zeros((n_modes, size, size))
    grids.reshape(n_modes, -1)[:, sup] = q

    slopes = np.zeros(2)
    if n_modes >= 3:
        rr, cc = np.nonzero(mask)
        dr = rr - rr.mean()
        dc = cc - cc.mean()
        scale = np.sqrt(float(sup.size))
        # least-squares plane fit; exact for the (near-planar) tilt modes
        slopes = np.array([
            (dr * (grids[2][mask] * scale)).sum() / (dr * dr).sum(),
            (dc * (grids[1][mask] * scale)).sum() / (dc * dc).sum(),
        ])
    return ZernikeBasis(grids=grids, mask=mask, tilt_slopes=slopes)


def project_phase(phi: np.ndarray, basis: ZernikeBasis) -> np.ndarray:
    """Least-squares mode coefficients (radians) of a pupil phase map.

    Values off the pupil are ignored.  Exact inverse of summing
    `phase_grids` weighted by coefficients, by orthonormality.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != basis.mask.shape:
        raise ValueError(f"phase map {phi.shape} does not match the pupil {basis.mask.shape}")
    vals = phi[basis.mask]
    return (basis.grids[:, basis.mask] @ vals) / np.sqrt(basis.n_pupil)


def symmetry_maps(basis: ZernikeBasis) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient transforms for a quarter-turn and a left-right flip.

    Returns (t_rot, t_flip): multiplying a coefficient row by t_rot.T gives
    the coefficients whose phase map is the rot90 of the original, likewise
    t_flip for a column flip.  Both are exact for a full mode stack because
    the pupil grid shares the symmetry and rotation/flip only mix modes of
    equal radial order.
    """
    flat = basis.phase_grids[:, basis.mask]

    def express(grids_t: np.ndarray) -> np.ndarray:
        t, *_ = np.linalg.lstsq(flat.T, grids_t[:, basis.mask].T, rcond=None)
        return t.T

    t_rot = express(np.stack([np.rot90(g) for g in basis.phase_grids]))
    t_flip = express(basis.phase_grids[:, :, ::-1])
    return t_rot, t_flip
