"""Benchmark suite plumbing: synthetic scenes, reference degradation, manifests.

A suite is a fixed set of clean scenes degraded exactly once by the anchored
split-step reference, with every realization seeded as `stream = image
index`.  The suite hash pins the whole object (scenes, realizations,
geometry), so downstream scores can refuse mismatched inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..imgcore import PSFField, RngStream
from ..oracle import TurbulenceProfile, anchor_grid, desk_profile, oracle_degrade
from ..oracle.splitstep import PSF_CROP


def synthetic_scene(n: int, seed: int) -> np.ndarray:
    """Deterministic grayscale test scene in [0.05, 0.95].

    Smooth ramp + band-limited texture + a few discs, rectangles and thin
    lines, so there is content at every scale a desk-size blur can move.
    """
    if n < 16:
        raise ValueError("scene side must be at least 16 px")
    rng = RngStream(int(seed), 0)
    rr, cc = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64), indexing="ij")

    ang = rng.uniform(0.0, 2.0 * np.pi)
    ramp = (np.cos(ang) * rr + np.sin(ang) * cc) / n
    img = 0.5 + 0.18 * (ramp - ramp.mean())

    noise = rng.standard_normal((n, n))
    f = np.fft.fftfreq(n)
    rad = np.hypot(f[:, None], f[None, :])
    tex = np.fft.ifft2(np.fft.fft2(noise) * np.exp(-((rad * n / 10.0) ** 2))).real
    img += 0.12 * tex / max(tex.std(), 1e-12)

    for _ in range(3):
        cr, cv = rng.uniform(0.15, 0.85, size=2) * n
        radius = rng.uniform(n / 16.0, n / 6.0)
        value = rng.uniform(0.2, 0.4) * (1.0 if rng.uniform() < 0.5 else -1.0)
        img += value * (np.hypot(rr - cr, cc - cv) <= radius)

    for _ in range(2):
        r0, c0 = (rng.uniform(0.1, 0.6, size=2) * n).astype(int)
        h = int(rng.uniform(n / 10.0, n / 4.0))
        w = int(rng.uniform(n / 10.0, n / 4.0))
        value = rng.uniform(0.15, 0.3) * (1.0 if rng.uniform() < 0.5 else -1.0)
        img[r0 : r0 + h, c0 : c0 + w] += value

    for _ in range(2):
        pr, pc = rng.uniform(0.2, 0.8, size=2) * n
        ang = rng.uniform(0.0, np.pi)
        dist = np.abs(np.cos(ang) * (rr - pr) + np.sin(ang) * (cc - pc))
        value = rng.uniform(0.25, 0.45) * (1.0 if rng.uniform() < 0.5 else -1.0)
        img += value * np.exp(-((dist / 0.7) ** 2))

    return np.clip(img, 0.05, 0.95)


@dataclass
class Suite:
    """Clean scenes, their reference degradations, and the realization data."""

    clean: np.ndarray
    degraded: np.ndarray
    fields: list
    flows: np.ndarray
    profile: TurbulenceProfile
    anchors: tuple
    seed: int
    psf_crop: int = PSF_CROP
    _hash: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        if self.clean.ndim != 3 or self.clean.shape != self.degraded.shape:
            raise ValueError("clean and degraded must be matching (N, H, W) stacks")
        self.anchors = (int(self.anchors[0]), int(self.anchors[1]))

    @property
    def count(self) -> int:
        return self.clean.shape[0]

    @property
    def image_shape(self) -> tuple:
        return self.clean.shape[1:]

    @property
    def anchor_coords(self) -> tuple:
        return anchor_grid(self.image_shape, *self.anchors)

    @property
    def hash(self) -> str:
        if not self._hash:
            h = hashlib.sha256()
            p = self.profile
            head = (
                f"{self.count},{self.image_shape},{self.anchors},{self.seed},{self.psf_crop},"
                f"{p.d_m},{p.wavelength_m},{p.path_m},{p.r0_m},{p.screens},{p.grid},{p.dx_m}"
            )
            h.update(head.encode())
            h.update(np.ascontiguousarray(self.clean, dtype=np.float64).tobytes())
            h.update(np.ascontiguousarray(self.degraded, dtype=np.float64).tobytes())
            self._hash = h.hexdigest()
        return self._hash


def build_suite(
    images,
    d_over_r0: float = 4.0,
    screens: int = 5,
    anchors=(8, 8),
    seed: int = 0,
    psf_crop: int = PSF_CROP,
) -> Suite:
    """Degrade each scene once with the reference simulator.

    Image i uses `RngStream(seed, stream=i)`, so any frame can be
    regenerated (or reproduced by a reference-simulator handle) in
    isolation.
    """
    clean = np.ascontiguousarray(np.asarray(images, dtype=np.float64))
    if clean.ndim != 3:
        raise ValueError("images must be an (N, H, W) stack")
    if clean.shape[1] != clean.shape[2]:
        raise ValueError("suite scenes must be square")
    profile = desk_profile(clean.shape[1], d_over_r0, screens)
    degraded = np.empty_like(clean)
    fields: list[PSFField] = []
    flows = np.empty(clean.shape + (2,))
    for i in range(clean.shape[0]):
        y, fld, flow = oracle_degrade(clean[i], profile, anchors, RngStream(seed, i), psf_crop)
        degraded[i] = y
        fields.append(fld)
        flows[i] = flow
    return Suite(clean, degraded, fields, flows, profile, tuple(anchors), int(seed), int(psf_crop))


def _sha256(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()


def suite_manifest(suite: Suite) -> dict:
    """JSON-ready description: geometry, seeds, per-image hashes."""
    p = suite.profile
    return {
        "suite_hash": suite.hash,
        "seed": suite.seed,
        "anchors": list(suite.anchors),
        "psf_crop": suite.psf_crop,
        "count": suite.count,
        "image_shape": list(suite.image_shape),
        "profile": {
            "d_m": p.d_m,
            "wavelength_m": p.wavelength_m,
            "path_m": p.path_m,
            "r0_m": p.r0_m,
            "screens": p.screens,
            "grid": p.grid,
            "dx_m": p.dx_m,
        },
        "images": [
            {
                "index": i,
                "stream": i,
                "clean_sha256": _sha256(suite.clean[i]),
                "degraded_sha256": _sha256(suite.degraded[i]),
            }
            for i in range(suite.count)
        ],
    }


def write_manifest(suite: Suite, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(suite_manifest(suite), fh, sort_keys=True, indent=1)
        fh.write("\n")
