"""Shallow map from non-tilt aberration coefficients to basis coefficients.

Three affine layers with a softplus between them, trained by mini-batch
Adam on mean squared error.  Gradients are derived by hand (no autodiff
dependency); `loss_and_grads` is the single code path used by both training
and the finite-difference checks in the test suite.

Preprocessing is recorded on the trained map so a saved map is
self-contained: inputs are optionally extended with their squares, then
standardized per dimension; targets are centered and divided by a per-output
scale that blends the per-dimension std with the global RMS
(std^q * rms^(1-q)).  The blend stops rare high-order outputs from being
amplified into the loss the way full per-dimension whitening does, while
still giving them more weight than a single global scale; q = 0.5 measured
best for kernel reconstruction.  The output layer starts at zero so the
initial map is the target mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..imgcore import RngStream, read_container, write_container

WEIGHT_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass(frozen=True)
class MapConfig:
    hidden: int = 256
    epochs: int = 30
    batch_size: int = 512
    learning_rate: float = 2e-3
    val_fraction: float = 0.1
    warmup_epochs: int = 2
    target_scale_mix: float = 0.5
    square_features: bool = True

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden, epochs and batch_size must be >= 1")
        if not 0 < self.learning_rate < 1:
            raise ValueError("learning_rate must lie in (0, 1)")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("warmup_epochs must lie in [0, epochs)")
        if not 0 <= self.target_scale_mix <= 1:
            raise ValueError("target_scale_mix must lie in [0, 1]")


def _softplus(t: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, t)


def _featurize(rows: np.ndarray, square: bool) -> np.ndarray:
    if square:
        return np.concatenate([rows, rows**2], axis=1)
    return rows


def forward(weights: dict, a: np.ndarray) -> np.ndarray:
    """Network output for standardized inputs `a` of shape (N, d_in)."""
    z1 = _softplus(a @ weights["w1"].T + weights["b1"])
    z2 = _softplus(z1 @ weights["w2"].T + weights["b2"])
    return z2 @ weights["w3"].T + weights["b3"]


def loss_and_grads(weights: dict, a: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its gradient for one batch.

    Returns (loss, grads) with grads keyed like `weights`.  The backward
    pass is the usual chain rule through the two softplus layers; expit is
    the softplus derivative.
    """
    t1 = a @ weights["w1"].T + weights["b1"]
    z1 = _softplus(t1)
    t2 = z1 @ weights["w2"].T + weights["b2"]
    z2 = _softplus(t2)
    pred = z2 @ weights["w3"].T + weights["b3"]

    resid = pred - y
    loss = float(np.mean(resid**2))
    e = (2.0 / resid.size) * resid

    grads = {}
    grads["w3"] = e.T @ z2
    grads["b3"] = e.sum(axis=0)
    dz2 = (e @ weights["w3"]) * expit(t2)
    grads["w2"] = dz2.T @ z1
    grads["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ weights["w2"]) * expit(t1)
    grads["w1"] = dz1.T @ a
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


@dataclass
class P2SMap:
    """Trained coefficient map with its recorded preprocessing and metadata.

    `in_mean`/`in_std` standardize the (possibly square-extended) feature
    vector; `out_mean`/`out_scale` undo the target transform.
    """

    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_scale: np.ndarray
    weights: dict
    square_features: bool = True
    loss_curve: np.ndarray = field(default_factory=lambda: np.zeros(0))
    val_error: float = float("nan")

    def __post_init__(self):
        self.in_mean = np.asarray(self.in_mean, dtype=np.float64)
        self.in_std = np.asarray(self.in_std, dtype=np.float64)
        self.out_mean = np.asarray(self.out_mean, dtype=np.float64)
        self.out_scale = np.asarray(self.out_scale, dtype=np.float64)
        self.weights = {k: np.asarray(self.weights[k], dtype=np.float64) for k in WEIGHT_KEYS}
        if np.any(self.in_std <= 0) or np.any(self.out_scale <= 0):
            raise ValueError("input and output scales must be positive")
        for k in WEIGHT_KEYS:
            if not np.all(np.isfinite(self.weights[k])):
                raise ValueError(f"weight {k} contains non-finite values")

    @property
    def n_inputs(self) -> int:
        """Raw coefficient count expected by `__call__`."""
        return self.in_mean.size // 2 if self.square_features else self.in_mean.size

    @property
    def n_outputs(self) -> int:
        return self.weights["w3"].shape[0]

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        """Map (N, d_in) or (d_in,) coefficient rows to (N, L) or (L,)."""
        alpha = np.asarray(alpha, dtype=np.float64)
        one = alpha.ndim == 1
        rows = np.atleast_2d(alpha)
        if rows.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} inputs, got {rows.shape[1]}")
        feats = (_featurize(rows, self.square_features) - self.in_mean) / self.in_std
        out = forward(self.weights, feats) * self.out_scale + self.out_mean
        return out[0] if one else out

    def save(self, path) -> None:
        write_container(
            path,
            {
                "kind": "p2s_map",
                "val_error": float(self.val_error),
                "square_features": bool(self.square_features),
            },
            {
                "in_mean": self.in_mean,
                "in_std": self.in_std,
                "out_mean": self.out_mean,
                "out_scale": self.out_scale,
                "loss_curve": self.loss_curve,
                **{k: self.weights[k] for k in WEIGHT_KEYS},
            },
        )

    @classmethod
    def load(cls, path) -> "P2SMap":
        meta, arrays = read_container(path)
        if meta.get("kind") != "p2s_map":
            raise ValueError("not a map container")
        return cls(
            arrays["in_mean"],
            arrays["in_std"],
            arrays["out_mean"],
            arrays["out_scale"],
            {k: arrays[k] for k in WEIGHT_KEYS},
            meta["square_features"],
            arrays["loss_curve"],
            meta["val_error"],
        )


def expand_symmetries(
    alphas: np.ndarray,
    kernels: np.ndarray,
    t_rot: np.ndarray,
    t_flip: np.ndarray,
    basis_set,
) -> tuple[np.ndarray, np.ndarray]:
    """Expand (alpha, kernel) pairs 16x by exact kernel symmetries.

    The dihedral group of the kernel grid plus phase negation: 4 quarter
    turns x optional column flip x optional sign.  `t_rot`/`t_flip` are the
    coefficient transforms from `zernike.symmetry_maps`; a quarter turn of
    the coefficients turns the kernel by rot90(k, 3), a coefficient flip
    mirrors columns, negation point-reflects.  Targets are projected onto
    `basis_set` one group at a time, so the transformed kernel stacks are
    never held simultaneously.  Returns (alphas_out, betas_out) of length
    16 N in a fixed group order.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    if alphas.ndim != 2 or kernels.ndim != 3 or alphas.shape[0] != kernels.shape[0]:
        raise ValueError("need (N, M) alphas and (N, K, K) kernels with matching N")
    out_a = []
    out_b = []
    for sign in (1.0, -1.0):
        for flip in (False, True):
            for quarter in range(4):
                t = np.linalg.matrix_power(t_rot, quarter)
                if flip:
                    t = t_flip @ t
                t = sign * t
                ka = np.rot90(kernels, 3 * quarter, axes=(1, 2))
                if flip:
                    ka = ka[:, :, ::-1]
                if sign < 0:
                    ka = ka[:, ::-1, ::-1]
                out_a.append(alphas @ t.T)
                out_b.append(basis_set.project(np.ascontiguousarray(ka)))
                del ka
    return np.concatenate(out_a), np.concatenate(out_b)


def _lr_at(epoch: int, config: MapConfig) -> float:
    if epoch < config.warmup_epochs:
        return config.learning_rate * (epoch + 1) / config.warmup_epochs
    span = config.epochs - config.warmup_epochs
    return config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * (epoch - config.warmup_epochs) / span))


def fit_p2s(
    alphas: np.ndarray,
    betas: np.ndarray,
    config: MapConfig,
    rng: RngStream,
    val: tuple | None = None,
) -> P2SMap:
    """Train the coefficient map on (alpha, beta) pairs.

    Requires at least 10^4 pairs.  Unless explicit `val` pairs are given, a
    `val_fraction` split is held out at random; the reported validation
    error is RMS prediction error relative to the RMS target magnitude
    (absolute when the targets are identically zero).  Pass explicit `val`
    pairs when the training set contains symmetry-expanded copies, so the
    report is not flattered by near-duplicates.  Training is deterministic
    given the stream.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if alphas.ndim != 2 or betas.ndim != 2 or alphas.shape[0] != betas.shape[0]:
        raise ValueError("alphas and betas must be (N, d_in) and (N, L) with matching N")
    n = alphas.shape[0]
    if n < 10_000:
        raise ValueError(f"need at least 10^4 training pairs, got {n}")
    if not (np.all(np.isfinite(alphas)) and np.all(np.isfinite(betas))):
        raise ValueError("training pairs contain non-finite values")

    if val is None:
        n_val = max(1, int(round(n * config.val_fraction)))
        perm = rng.child(0).generator.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        a_train, y_train = alphas[train_idx], betas[train_idx]
        a_val, y_val = alphas[val_idx], betas[val_idx]
    else:
        a_train, y_train = alphas, betas
        a_val = np.asarray(val[0], dtype=np.float64)
        y_val = np.asarray(val[1], dtype=np.float64)
        if a_val.ndim != 2 or a_val.shape[1] != alphas.shape[1] or a_val.shape[0] != y_val.shape[0]:
            raise ValueError("val pairs must match the training pair shapes")

    f_train = _featurize(a_train, config.square_features)
    in_mean = f_train.mean(axis=0)
    in_std = f_train.std(axis=0)
    in_std[in_std == 0] = 1.0
    f_train = (f_train - in_mean) / in_std

    out_mean = y_train.mean(axis=0)
    centered = y_train - out_mean
    rms = float(np.sqrt(np.mean(centered**2)))
    q = config.target_scale_mix
    out_scale = y_train.std(axis=0) ** q * rms ** (1.0 - q)
    out_scale[out_scale <= 0] = rms if rms > 0 else 1.0
    y_scaled = centered / out_scale

    d_in, d_out, h = f_train.shape[1], betas.shape[1], config.hidden
    wrng = rng.child(1)
    weights = {
        "w1": wrng.standard_normal((h, d_in)) * np.sqrt(2.0 / d_in),
        "b1": np.zeros(h),
        "w2": wrng.standard_normal((h, h)) * np.sqrt(2.0 / h),
        "b2": np.zeros(h),
        "w3": np.zeros((d_out, h)),
        "b3": np.zeros(d_out),
    }

    # Adam state
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = {k: np.zeros_like(v) for k, v in weights.items()}
    v = {k: np.zeros_like(w) for k, w in weights.items()}
    step = 0

    curve = []
    n_train = f_train.shape[0]
    n_steps = max(1, n_train // config.batch_size)
    for epoch in range(config.epochs):
        order = rng.child(2 + epoch).generator.permutation(n_train)
        lr = _lr_at(epoch, config)
        epoch_losses = []
        for s in range(n_steps):
            batch = order[s * config.batch_size : (s + 1) * config.batch_size]
            if batch.size == 0:
                batch = order
            loss, grads = loss_and_grads(weights, f_train[batch], y_scaled[batch])
            if not np.isfinite(loss):
                raise ValueError(f"training diverged: non-finite loss at epoch {epoch}")
            epoch_losses.append(loss)
            step += 1
            for k in WEIGHT_KEYS:
                m[k] = beta1 * m[k] + (1 - beta1) * grads[k]
                v[k] = beta2 * v[k] + (1 - beta2) * grads[k] ** 2
                mhat = m[k] / (1 - beta1**step)
                vhat = v[k] / (1 - beta2**step)
                weights[k] -= lr * mhat / (np.sqrt(vhat) + eps)
        curve.append(float(np.mean(epoch_losses)))

    fitted = P2SMap(in_mean, in_std, out_mean, out_scale, weights, config.square_features, np.array(curve))
    pred = fitted(a_val)
    err = float(np.sqrt(np.mean((pred - y_val) ** 2)))
    ref = float(np.sqrt(np.mean(y_val**2)))
    fitted.val_error = err / ref if ref > 0 else err
    return fitted
