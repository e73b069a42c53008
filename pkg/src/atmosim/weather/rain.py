"""Rain streak rendering, adherent raindrops, and the dynamic streak recurrence.

Streaks are line segments with a Gaussian cross profile, truncated at three
standard deviations so the layer stays genuinely sparse.  The sparsity bound
carried by the state is a hard budget: if the rendered support would exceed
it, the faintest pixels are zeroed until it fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import shift as nd_shift

from ..imgcore import RngStream, as_image

_PROFILE_CUTOFF = 3.0


@dataclass(frozen=True)
class RainState:
    """Streak statistics, raindrop fields, and the dynamic-rain recurrence.

    Streaks: `count` segments of `length` pixels at `angle` radians (spread
    `angle_spread`), Gaussian cross profile with std `width`, peak `intensity`,
    support capped at `max_sparsity` of the image area.  Raindrops: binary
    mask `drop_mask` with layer `drop_layer` supported on it (both optional).
    Dynamics: decay `gamma` in [0, 1), `innovation_scale`, and a per-step
    `motion` vector in pixels.
    """

    count: int = 0
    length: float = 9.0
    width: float = 0.7
    angle: float = 1.3
    angle_spread: float = 0.08
    intensity: float = 0.4
    max_sparsity: float = 0.02
    drop_mask: np.ndarray = None
    drop_layer: np.ndarray = None
    gamma: float = 0.0
    innovation_scale: float = 1.0
    motion: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("streak count must be >= 0")
        for name in ("length", "width", "intensity", "innovation_scale"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
        if not 0.0 < self.max_sparsity <= 1.0:
            raise ValueError("max_sparsity must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if (self.drop_mask is None) != (self.drop_layer is None):
            raise ValueError("drop_mask and drop_layer must be given together")
        if self.drop_mask is not None:
            m = np.asarray(self.drop_mask, dtype=np.float64)
            d = np.asarray(self.drop_layer, dtype=np.float64)
            if m.shape != d.shape or m.ndim != 2:
                raise ValueError("drop fields must be matching 2-D maps")
            if not np.all((m == 0.0) | (m == 1.0)):
                raise ValueError("drop_mask must be binary")
            if d.min() < 0 or not np.all(np.isfinite(d)):
                raise ValueError("drop_layer must be finite and >= 0")
            if np.any((d != 0.0) & (m == 0.0)):
                raise ValueError("drop_layer has support outside the mask")
            object.__setattr__(self, "drop_mask", m)
            object.__setattr__(self, "drop_layer", d)
        object.__setattr__(self, "motion", (float(self.motion[0]), float(self.motion[1])))

    def to_json(self) -> dict:
        doc = {
            "kind": "rain_state",
            "count": int(self.count),
            "length": self.length,
            "width": self.width,
            "angle": self.angle,
            "angle_spread": self.angle_spread,
            "intensity": self.intensity,
            "max_sparsity": self.max_sparsity,
            "gamma": self.gamma,
            "innovation_scale": self.innovation_scale,
            "motion": list(self.motion),
            "drop_mask": None if self.drop_mask is None else self.drop_mask.tolist(),
            "drop_layer": None if self.drop_layer is None else self.drop_layer.tolist(),
        }
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RainState":
        if doc.get("kind") != "rain_state":
            raise ValueError("not a rain_state document")
        mask = doc.get("drop_mask")
        layer = doc.get("drop_layer")
        return cls(
            count=doc["count"], length=doc["length"], width=doc["width"],
            angle=doc["angle"], angle_spread=doc["angle_spread"],
            intensity=doc["intensity"], max_sparsity=doc["max_sparsity"],
            drop_mask=None if mask is None else np.array(mask, dtype=np.float64),
            drop_layer=None if layer is None else np.array(layer, dtype=np.float64),
            gamma=doc["gamma"], innovation_scale=doc["innovation_scale"],
            motion=tuple(doc["motion"]),
        )


def _render_segment(b, center, angle, length, width, intensity):
    h, w = b.shape
    d = np.array([np.cos(angle), np.sin(angle)])  # (row, col) direction
    half = length / 2.0
    margin = _PROFILE_CUTOFF * width
    p0 = center - half * d
    p1 = center + half * d
    r0 = max(0, int(np.floor(min(p0[0], p1[0]) - margin)))
    r1 = min(h, int(np.ceil(max(p0[0], p1[0]) + margin)) + 1)
    c0 = max(0, int(np.floor(min(p0[1], p1[1]) - margin)))
    c1 = min(w, int(np.ceil(max(p0[1], p1[1]) + margin)) + 1)
    if r0 >= r1 or c0 >= c1:
        return
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    rel = np.stack([rr - center[0], cc - center[1]], axis=-1)
    along = np.clip(rel @ d, -half, half)
    perp = rel - along[..., None] * d
    dist2 = np.sum(perp**2, axis=-1)
    prof = np.where(
        dist2 <= margin**2,
        intensity * np.exp(-0.5 * dist2 / max(width, 1e-9) ** 2),
        0.0,
    )
    np.maximum(b[r0:r1, c0:c1], prof, out=b[r0:r1, c0:c1])


def _enforce_sparsity(b, bound):
    budget = int(np.floor(bound * b.size))
    nz = b[b > 0.0]
    if nz.size <= budget:
        return b
    if budget == 0:
        b[:] = 0.0
        return b
    # zero the faintest pixels until the support fits the budget
    cut = np.partition(nz, nz.size - budget)[nz.size - budget]
    b[b < cut] = 0.0
    if np.count_nonzero(b) > budget:  # ties at the cut value
        b[b == cut] = 0.0
    return b


def render_streaks(shape, state: RainState, rng: RngStream):
    """Render the sparse nonnegative streak layer for one frame."""
    b = np.zeros(shape, dtype=np.float64)
    if state.count == 0:
        return b
    centers = rng.uniform(0.0, 1.0, (state.count, 2)) * np.array(shape)
    angles = state.angle + state.angle_spread * rng.standard_normal(state.count)
    for i in range(state.count):
        _render_segment(b, centers[i], angles[i], state.length, state.width,
                        state.intensity)
    return _enforce_sparsity(b, state.max_sparsity)


def rain_streak_apply(x, state: RainState, rng: RngStream):
    """y = clamp(x + b) with a freshly rendered streak layer b."""
    x = as_image(x)
    b = render_streaks(x.shape[:2], state, rng)
    add = b[:, :, None] if x.ndim == 3 else b
    return np.clip(x + add, 0.0, 1.0), b


def raindrop_apply(x, state: RainState):
    """y = (1 - M) * x + d: raindrop pixels replaced by the drop layer."""
    x = as_image(x)
    if state.drop_mask is None:
        raise ValueError("state carries no raindrop fields")
    m, d = state.drop_mask, state.drop_layer
    if m.shape != x.shape[:2]:
        raise ValueError(f"drop fields {m.shape} do not match image {x.shape[:2]}")
    if x.ndim == 3:
        m = m[:, :, None]
        d = d[:, :, None]
    return (1.0 - m) * x + d


def dynamic_rain_step(b_prev, state: RainState, rng: RngStream):
    """One step of the streak recurrence: decay, drift, and fresh innovation.

    b_t = gamma * shift(b_prev, motion) + innovation_scale * fresh streaks,
    clamped at zero.  Content drifting past the frame edge is lost rather
    than wrapped.
    """
    b_prev = np.asarray(b_prev, dtype=np.float64)
    if b_prev.ndim != 2:
        raise ValueError("streak layers are 2-D maps")
    moved = nd_shift(b_prev, state.motion, order=1, mode="constant", cval=0.0)
    fresh = render_streaks(b_prev.shape, state, rng)
    return np.maximum(state.gamma * moved + state.innovation_scale * fresh, 0.0)
