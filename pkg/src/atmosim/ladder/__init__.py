"""Lightweight degradation models behind one common simulator contract."""

from .degrade import (
    DEGRADE_BOUNDARY,
    blur_shared,
    deform_degrade,
    deform_flow,
    flipped_degrade,
    jitter_degrade,
    sample_deform_state,
    sample_jitter_flow,
    varying_degrade,
)
from .handles import (
    DeformHandle,
    FlippedHandle,
    IdentityHandle,
    JitterHandle,
    OracleHandle,
    SimulatorHandle,
    VaryingHandle,
    deserialize_handle,
    register_family,
    registered_families,
)
from .states import DeformState, JitterState, state_from_json, state_to_json

__all__ = [
    "DEGRADE_BOUNDARY",
    "DeformHandle",
    "DeformState",
    "FlippedHandle",
    "IdentityHandle",
    "JitterHandle",
    "JitterState",
    "OracleHandle",
    "SimulatorHandle",
    "VaryingHandle",
    "blur_shared",
    "deform_degrade",
    "deform_flow",
    "deserialize_handle",
    "flipped_degrade",
    "jitter_degrade",
    "register_family",
    "registered_families",
    "sample_deform_state",
    "sample_jitter_flow",
    "state_from_json",
    "state_to_json",
    "varying_degrade",
]
