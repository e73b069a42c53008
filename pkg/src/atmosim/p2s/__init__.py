"""Basis-convolution degradation: PCA kernel basis, coefficient maps, fast apply."""

from .basis import ORTHO_TOL, BasisSet, learn_basis
from .degrade import BetaField, p2s_degrade, p2s_vjp
from .handles import P2SHandle
from .mapnet import (
    WEIGHT_KEYS,
    MapConfig,
    P2SMap,
    expand_symmetries,
    fit_p2s,
    forward,
    loss_and_grads,
)

__all__ = [
    "ORTHO_TOL",
    "BasisSet",
    "learn_basis",
    "BetaField",
    "p2s_degrade",
    "p2s_vjp",
    "P2SHandle",
    "WEIGHT_KEYS",
    "MapConfig",
    "P2SMap",
    "expand_symmetries",
    "fit_p2s",
    "forward",
    "loss_and_grads",
]
