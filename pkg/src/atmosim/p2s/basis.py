"""PCA kernel basis for the fast basis-convolution simulator.

`learn_basis` runs mean-centered PCA over a bank of sampled PSF kernels and
keeps the leading L components as flattened orthonormal vectors.  Because
every sample has unit sum, the centered data lives in the zero-sum subspace,
so each component has (numerically) zero sum and any blend
mean + sum_l beta_l * phi_l keeps unit sum automatically.  That fact is what
lets the degradation stay linear in beta without a renormalization step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgcore import read_container, write_container

ORTHO_TOL = 1e-8


@dataclass
class BasisSet:
    """Mean kernel plus L orthonormal component kernels with variance ratios."""

    components: np.ndarray
    mean_kernel: np.ndarray
    variance_ratios: np.ndarray

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=np.float64)
        mean = np.asarray(self.mean_kernel, dtype=np.float64)
        ratios = np.asarray(self.variance_ratios, dtype=np.float64)
        if comp.ndim != 3 or comp.shape[1] != comp.shape[2]:
            raise ValueError(f"components must have shape (L, K, K), got {comp.shape}")
        ksz = comp.shape[1]
        if ksz % 2 == 0:
            raise ValueError("kernel size must be odd")
        if mean.shape != (ksz, ksz):
            raise ValueError("mean kernel shape does not match the components")
        if ratios.shape != (comp.shape[0],):
            raise ValueError("one variance ratio per component required")
        if comp.shape[0] > ksz * ksz:
            raise ValueError(f"L = {comp.shape[0]} exceeds the kernel dimension {ksz * ksz}")
        if not (np.all(np.isfinite(comp)) and np.all(np.isfinite(mean)) and np.all(np.isfinite(ratios))):
            raise ValueError("basis contains non-finite values")
        flat = comp.reshape(comp.shape[0], -1)
        gram = flat @ flat.T
        if np.max(np.abs(gram - np.eye(comp.shape[0]))) > ORTHO_TOL:
            raise ValueError(f"components are not orthonormal within {ORTHO_TOL}")
        self.components = comp
        self.mean_kernel = mean
        self.variance_ratios = ratios

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def ksize(self) -> int:
        return self.components.shape[1]

    def project(self, kernels: np.ndarray) -> np.ndarray:
        """Coefficients of (kernels - mean) on the components; (..., L)."""
        kernels = np.asarray(kernels, dtype=np.float64)
        if kernels.shape[-2:] != (self.ksize, self.ksize):
            raise ValueError(f"kernels must end in ({self.ksize}, {self.ksize})")
        flat = (kernels - self.mean_kernel).reshape(*kernels.shape[:-2], -1)
        return flat @ self.components.reshape(self.n_components, -1).T

    def reconstruct(self, beta: np.ndarray) -> np.ndarray:
        """Kernels mean + sum_l beta_l phi_l; (..., K, K)."""
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape[-1] != self.n_components:
            raise ValueError(f"beta must end in {self.n_components} coefficients")
        flat = beta @ self.components.reshape(self.n_components, -1)
        return self.mean_kernel + flat.reshape(*beta.shape[:-1], self.ksize, self.ksize)

    def save(self, path) -> None:
        write_container(
            path,
            {"kind": "p2s_basis", "ksize": int(self.ksize), "n_components": int(self.n_components)},
            {
                "components": self.components,
                "mean_kernel": self.mean_kernel,
                "variance_ratios": self.variance_ratios,
            },
        )

    @classmethod
    def load(cls, path) -> "BasisSet":
        meta, arrays = read_container(path)
        if meta.get("kind") != "p2s_basis":
            raise ValueError("not a basis container")
        comp = arrays["components"]
        # repair the float32 narrowing: re-orthonormalize in order and put the
        # mean kernel back on unit sum
        flat = comp.reshape(comp.shape[0], -1)
        for i in range(flat.shape[0]):
            for j in range(i):
                flat[i] -= (flat[j] @ flat[i]) * flat[j]
            flat[i] /= np.linalg.norm(flat[i])
        mean = arrays["mean_kernel"]
        return cls(flat.reshape(comp.shape), mean / mean.sum(), arrays["variance_ratios"])


def learn_basis(psf_samples: np.ndarray, n_components: int) -> BasisSet:
    """Mean-centered PCA over a bank of kernels, keeping `n_components`.

    Requires at least 10 * n_components samples.  Components are ordered by
    decreasing explained variance, with a sign convention (largest-magnitude
    entry positive) that makes the decomposition deterministic.  Asking for
    more components than the centered sample rank is rejected, except in the
    fully degenerate all-identical case, where every direction explains zero
    variance and an orthonormal completion is returned.
    """
    samples = np.asarray(psf_samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
        raise ValueError(f"psf_samples must have shape (N, K, K), got {samples.shape}")
    n, ksz = samples.shape[0], samples.shape[1]
    n_components = int(n_components)
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n_components > ksz * ksz:
        raise ValueError(f"n_components = {n_components} exceeds the kernel dimension {ksz * ksz}")
    if n < 10 * n_components:
        raise ValueError(f"need at least 10 * L = {10 * n_components} samples, got {n}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("psf_samples contain non-finite values")

    mean = samples.mean(axis=0)
    centered = (samples - mean).reshape(n, -1)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    # singular values at the level of cancellation noise from the mean
    # subtraction are indistinguishable from zero, so the floor has to track
    # the raw sample magnitude, not just svals[0]
    noise_floor = np.finfo(np.float64).eps * max(n, ksz * ksz) * max(
        float(svals[0]) if svals.size else 0.0, float(np.linalg.norm(samples))
    )
    rank = int(np.sum(svals > noise_floor))
    if rank > 0 and n_components > rank:
        raise ValueError(f"n_components = {n_components} exceeds the sample rank {rank}")
    if n_components > vt.shape[0]:
        raise ValueError(f"n_components = {n_components} exceeds the decomposition size {vt.shape[0]}")

    comp = vt[:n_components]
    # deterministic sign: largest-magnitude coordinate of each component positive
    lead = np.argmax(np.abs(comp), axis=1)
    signs = np.sign(comp[np.arange(n_components), lead])
    signs[signs == 0] = 1.0
    comp = comp * signs[:, None]

    svals_eff = np.where(svals > noise_floor, svals, 0.0)
    total = float(np.sum(svals_eff**2))
    ratios = (svals_eff[:n_components] ** 2 / total) if total > 0 else np.zeros(n_components)
    return BasisSet(comp.reshape(n_components, ksz, ksz), mean, ratios)
