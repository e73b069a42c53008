"""Lucky-patch fusion: keep the momentarily sharp patch from each frame.

Patches are scored by gradient energy and blended by overlap-add with a
raised-cosine window (strictly positive inside the patch), so the fused
image is a per-pixel convex combination of the input frames.
"""

from __future__ import annotations

import numpy as np

from .configs import LuckyConfig


def _positions(extent, patch, stride):
    pos = list(range(0, extent - patch + 1, stride))
    if pos[-1] != extent - patch:
        pos.append(extent - patch)
    return pos


def _raised_cosine(patch):
    u = (np.arange(patch) + 0.5) / patch
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * u)
    return np.outer(w, w)


def gradient_energy(patch) -> float:
    """Sharpness score: sum of squared forward differences, all channels."""
    p = np.asarray(patch, dtype=np.float64)
    return float(np.sum((p[:, 1:] - p[:, :-1]) ** 2) + np.sum((p[1:, :] - p[:-1, :]) ** 2))


def lucky_fuse(frames, cfg: LuckyConfig) -> np.ndarray:
    """Fuse a burst by per-patch selection of the sharpest frame."""
    stack = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(stack) < 2:
        raise ValueError("lucky fusion needs at least 2 frames")
    shape = stack[0].shape
    if any(f.shape != shape for f in stack):
        raise ValueError("frames must share one shape")
    h, w = shape[:2]
    if cfg.patch > min(h, w):
        raise ValueError(f"patch {cfg.patch} exceeds the frame extent {(h, w)}")

    win = _raised_cosine(cfg.patch)
    win_nd = win if len(shape) == 2 else win[:, :, None]
    acc = np.zeros(shape)
    wsum = np.zeros((h, w) if len(shape) == 2 else (h, w, 1))
    for r in _positions(h, cfg.patch, cfg.stride):
        for c in _positions(w, cfg.patch, cfg.stride):
            scores = [gradient_energy(f[r : r + cfg.patch, c : c + cfg.patch]) for f in stack]
            pick = stack[int(np.argmax(scores))]
            acc[r : r + cfg.patch, c : c + cfg.patch] += win_nd * pick[r : r + cfg.patch, c : c + cfg.patch]
            wsum[r : r + cfg.patch, c : c + cfg.patch] += win_nd
    return acc / wsum
