"""Variational reconstruction with the simulator in the loop.

The objective is (1 + mu) * sum((H(x) - y)^2) + lam_tv * TV_eps(x), where
TV_eps is the smoothed isotropic total variation.  The mu-weighted copy of
the data term is the re-degradation consistency penalty: matching the
observation once more through the simulator, rather than any prior on x.
Descent is plain projected gradient with backtracking, so nothing beyond
`vjp_x` is asked of the simulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..imgcore import as_image

_ARMIJO = 1e-4
_STEP_GROW = 1.5
_STEP_FLOOR = 1e-16


def _tv_channel(x, eps):
    gh = np.zeros_like(x)
    gv = np.zeros_like(x)
    gh[:, :-1] = x[:, 1:] - x[:, :-1]
    gv[:-1, :] = x[1:, :] - x[:-1, :]
    mag = np.sqrt(gh * gh + gv * gv + eps * eps)
    wh = gh / mag
    wv = gv / mag
    grad = -wh - wv
    grad[:, 1:] += wh[:, :-1]
    grad[1:, :] += wv[:-1, :]
    return float(mag.sum()), grad


def tv_value_grad(x, eps: float):
    """Smoothed isotropic TV (forward differences, replicated edge) and its gradient."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return _tv_channel(x, eps)
    value = 0.0
    grad = np.empty_like(x)
    for c in range(x.shape[2]):
        v, g = _tv_channel(x[:, :, c], eps)
        value += v
        grad[:, :, c] = g
    return value, grad


@dataclass
class RestoreResult:
    """Reconstruction output: the iterate, its trace, and a stall flag.

    `trace` is one dict per accepted step (plus the starting point) with the
    objective split into data, TV, and consistency terms.  `stalled` is set
    when backtracking underflowed before the tolerance was met; the returned
    `x` is then the best iterate seen.
    """

    x: np.ndarray
    trace: list
    stalled: bool

    @property
    def objective_trace(self):
        return np.array([rec["objective"] for rec in self.trace])


def dump_trace_jsonl(trace, path) -> None:
    """Write one JSON object per trace record."""
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def tv_deconvolve(y, sim, cfg, x0=None) -> RestoreResult:
    """Minimize the TV-regularized data fit for a fixed simulator state.

    The simulator must advertise `differentiable`; the reference split-step
    simulator is rejected here because no adjoint exists for it.  Iterates
    stay in [0, 1]; every accepted step strictly decreases the objective.
    """
    if not sim.differentiable:
        raise ValueError(
            f"the {sim.family} simulator is not differentiable; tv_deconvolve needs vjp_x"
        )
    y = as_image(y)
    x = as_image(x0).copy() if x0 is not None else y.copy()

    data_weight = 1.0 + cfg.mu

    def split(xc):
        r = sim.degrade(xc) - y
        data = float(np.sum(r * r))
        tv_val, tv_grad = tv_value_grad(xc, cfg.eps_tv)
        obj = data_weight * data + cfg.lam_tv * tv_val
        return obj, data, tv_val, r, tv_grad

    obj, data, tv_val, r, tv_grad = split(x)
    trace = [_record(0, obj, data, tv_val, cfg)]
    best_x, best_obj = x, obj
    stalled = False
    t = cfg.step_init

    for it in range(1, cfg.max_iter + 1):
        grad = 2.0 * data_weight * sim.vjp_x(x, r) + cfg.lam_tv * tv_grad
        accepted = False
        while t > _STEP_FLOOR * cfg.step_init:
            x_new = np.clip(x - t * grad, 0.0, 1.0)
            step = x_new - x
            if not step.any():
                break
            obj_new, data_new, tv_new, r_new, tvg_new = split(x_new)
            if obj_new <= obj - (_ARMIJO / t) * float(np.sum(step * step)):
                accepted = True
                break
            t *= cfg.backtrack
        if not accepted:
            stalled = bool(t <= _STEP_FLOOR * cfg.step_init)
            break
        drop = (obj - obj_new) / max(obj, np.finfo(np.float64).tiny)
        x, obj, data, tv_val, r, tv_grad = x_new, obj_new, data_new, tv_new, r_new, tvg_new
        trace.append(_record(it, obj, data, tv_val, cfg))
        if obj < best_obj:
            best_x, best_obj = x, obj
        t = min(t * _STEP_GROW, cfg.step_init)
        if drop < cfg.tol:
            break

    return RestoreResult(best_x, trace, stalled)


def _record(it, obj, data, tv_val, cfg):
    return {
        "iteration": int(it),
        "objective": obj,
        "data": data,
        "tv": tv_val,
        "consistency": cfg.mu * data,
    }
