"""Model-based restoration: TV deconvolution, lucky fusion, alternating recovery."""

from .alternate import alternate_update, consistency_score
from .configs import LuckyConfig, ReconConfig
from .lucky import gradient_energy, lucky_fuse
from .tv import RestoreResult, dump_trace_jsonl, tv_deconvolve, tv_value_grad

__all__ = [
    "LuckyConfig",
    "ReconConfig",
    "RestoreResult",
    "alternate_update",
    "consistency_score",
    "dump_trace_jsonl",
    "gradient_energy",
    "lucky_fuse",
    "tv_deconvolve",
    "tv_value_grad",
]
