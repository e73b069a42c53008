"""Candidate scoring harness: paired suites, capacity fits, the four scores, gate."""

from .evals import (
    DIFF_THRESHOLD,
    RECON_LAMBDA_GRID,
    ComplexityScore,
    DiffScore,
    ReconScore,
    SimScore,
    eval_complexity,
    eval_diff,
    eval_recon,
    eval_sim_loss,
)
from .fitting import (
    FittedCandidate,
    fit_deform,
    fit_identity,
    fit_jitter,
    fit_oracle,
    fit_p2s_candidate,
    fit_phase,
    fit_varying,
    fitted_flow,
    fitted_kernels,
    gaussian_sigma_fit,
    standard_complexity_handle,
    suite_kernel_basis,
)
from .report import (
    DEFAULT_TAU_COMPLEXITY_S,
    DEFAULT_TAU_SIM,
    CifReport,
    build_report,
    config_hash,
    gate_verdict,
    markdown_table,
    report_json,
    select_simulator,
)
from .suite import Suite, build_suite, suite_manifest, synthetic_scene, write_manifest

__all__ = [
    "DEFAULT_TAU_COMPLEXITY_S",
    "DEFAULT_TAU_SIM",
    "DIFF_THRESHOLD",
    "RECON_LAMBDA_GRID",
    "CifReport",
    "ComplexityScore",
    "DiffScore",
    "FittedCandidate",
    "ReconScore",
    "SimScore",
    "Suite",
    "build_report",
    "build_suite",
    "config_hash",
    "eval_complexity",
    "eval_diff",
    "eval_recon",
    "eval_sim_loss",
    "fit_deform",
    "fit_identity",
    "fit_jitter",
    "fit_oracle",
    "fit_p2s_candidate",
    "fit_phase",
    "fit_varying",
    "fitted_flow",
    "fitted_kernels",
    "gate_verdict",
    "gaussian_sigma_fit",
    "markdown_table",
    "report_json",
    "select_simulator",
    "standard_complexity_handle",
    "suite_kernel_basis",
    "suite_manifest",
    "synthetic_scene",
    "write_manifest",
]
