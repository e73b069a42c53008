"""Weather degradations behind the common simulator contract.

Both handles are fully differentiable with analytic adjoints.  The rain
handle freezes its streak layer at construction (one rendered realization at
unit intensity) so that degrade is deterministic and smooth in theta.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..imgcore import RngStream, as_image
from ..ladder import SimulatorHandle, register_family
from .haze import HazeState, haze_apply, haze_partials
from .rain import RainState, render_streaks


@register_family
class HazeHandle(SimulatorHandle):
    """Scattering-medium simulator; theta = transmission plus airlight.

    The map y = x * t + A * (1 - t) is affine in x and bilinear in (t, A),
    so every adjoint is exact.
    """

    family = "haze"
    differentiable = True
    supports_theta_vjp = True

    def __init__(self, state: HazeState):
        self.state = state

    def degrade(self, x):
        return haze_apply(x, self.state)

    def vjp_x(self, x, cotangent):
        p_x, _, _ = haze_partials(x, self.state)
        return np.asarray(cotangent, dtype=np.float64) * p_x

    def vjp_theta(self, x, cotangent):
        cot = np.asarray(cotangent, dtype=np.float64)
        _, p_t, p_a = haze_partials(x, self.state)
        gt = cot * p_t
        if self.state.transmission.ndim == 2:
            g_trans = gt.sum(axis=2) if gt.ndim == 3 else gt
        else:
            g_trans = np.array([gt.sum()])
        ga = cot * p_a
        if self.state.airlight.ndim == 1:
            g_air = ga.sum(axis=(0, 1))
        else:
            g_air = np.array([ga.sum()])
        return np.concatenate([np.ravel(g_trans), np.ravel(g_air)])

    def theta_vector(self):
        return np.concatenate(
            [np.atleast_1d(self.state.transmission).ravel(),
             np.atleast_1d(self.state.airlight).ravel()]
        )

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        t = self.state.transmission
        nt = max(t.size, 1)
        if vec.size != self.theta_vector().size:
            raise ValueError(f"haze theta must have {self.theta_vector().size} entries")
        new_t = vec[:nt].reshape(t.shape)
        new_a = vec[nt:].reshape(self.state.airlight.shape)
        return HazeHandle(HazeState(new_t, new_a))

    def theta_lower_bounds(self):
        return np.zeros(self.theta_vector().size)

    def theta_upper_bounds(self):
        return np.ones(self.theta_vector().size)

    def madds_per_pixel(self, shape):
        return 3.0

    def payload(self):
        return {"state": self.state.to_json()}

    @classmethod
    def from_payload(cls, payload):
        return cls(HazeState.from_json(payload["state"]))


@register_family
class RainStreakHandle(SimulatorHandle):
    """Additive streak simulator; theta = (intensity,).

    The layer stored on the handle is rendered at unit intensity, so
    degrade(x) = clip(x + intensity * layer, 0, 1) is piecewise linear in
    both arguments and the adjoints only need the clamp mask.  Scaling a
    unit layer is exactly equivalent to rendering at the target intensity:
    both the profile cutoff and the sparsity cut compare relative
    magnitudes only.
    """

    family = "rain"
    differentiable = True
    supports_theta_vjp = True

    def __init__(self, layer: np.ndarray, intensity: float):
        layer = np.asarray(layer, dtype=np.float64)
        if layer.ndim != 2:
            raise ValueError("streak layer must be a 2-D map")
        if layer.min() < 0 or not np.all(np.isfinite(layer)):
            raise ValueError("streak layer must be finite and >= 0")
        if not np.isfinite(intensity) or intensity < 0:
            raise ValueError("intensity must be finite and >= 0")
        self.layer = layer
        self.intensity = float(intensity)

    @classmethod
    def sample(cls, shape, state: RainState, rng: RngStream):
        """Render one streak realization at unit intensity for this shape."""
        unit = render_streaks(shape, replace(state, intensity=1.0), rng)
        return cls(unit, state.intensity)

    def _check_shape(self, x):
        if x.shape[:2] != self.layer.shape:
            raise ValueError(
                f"image shape {x.shape[:2]} does not match the streak layer {self.layer.shape}"
            )

    def _pre_clip(self, x):
        add = self.layer[:, :, None] if x.ndim == 3 else self.layer
        return x + self.intensity * add

    def degrade(self, x):
        x = as_image(x)
        self._check_shape(x)
        return np.clip(self._pre_clip(x), 0.0, 1.0)

    def _mask(self, x):
        z = self._pre_clip(x)
        return ((z > 0.0) & (z < 1.0)).astype(np.float64)

    def vjp_x(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        return np.asarray(cotangent, dtype=np.float64) * self._mask(x)

    def vjp_theta(self, x, cotangent):
        x = as_image(x)
        self._check_shape(x)
        cot = np.asarray(cotangent, dtype=np.float64)
        inner = cot * self._mask(x)
        if inner.ndim == 3:
            inner = inner.sum(axis=2)
        return np.array([np.sum(inner * self.layer)])

    def theta_vector(self):
        return np.array([self.intensity])

    def with_theta(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (1,):
            raise ValueError("rain theta is (intensity,)")
        return RainStreakHandle(self.layer, vec[0])

    def theta_lower_bounds(self):
        return np.zeros(1)

    def madds_per_pixel(self, shape):
        return 2.0

    def payload(self):
        return {"layer": self.layer.tolist(), "intensity": self.intensity}

    @classmethod
    def from_payload(cls, payload):
        return cls(np.array(payload["layer"], dtype=np.float64), payload["intensity"])
