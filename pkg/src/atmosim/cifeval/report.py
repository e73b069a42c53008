"""Report assembly and the selection gate.

A report carries one candidate's four scores, the thresholds it was judged
against, the verdict with reasons, and enough provenance (seeds, suite hash,
config hash, fitting procedure, recorded substitutions) to reproduce it.
Measured wall-clock, hardware, and the generation time live in a `volatile`
block that canonical serialization can exclude, so two runs with identical
inputs compare byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..restore import ReconConfig
from .evals import (
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
from .fitting import FittedCandidate
from .suite import Suite

DEFAULT_TAU_SIM = 0.05
DEFAULT_TAU_COMPLEXITY_S = 1.0

SIM_LOSS_METRIC = "mean per-pixel squared error"

_SUBSTITUTIONS = (
    "expectation over scenes approximated by the finite committed suite",
    "reference degradation realized by the anchored split-step simulator with recorded seeds",
    "minimum over reconstruction operators approximated by the committed lambda grid",
)


@dataclass
class CifReport:
    candidate_id: str
    family: str
    theta_hash: str
    e_sim: float
    e_sim_diagnostics: dict
    e_complexity: dict
    e_recon: float | None
    e_recon_detail: dict
    e_diff: dict
    thresholds: dict
    gate: dict
    provenance: dict
    volatile: dict = field(default_factory=dict)


def _canonical(value):
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _canonical(value.item())
    if isinstance(value, float):
        if math.isnan(value):
            raise ValueError("NaN has no canonical serialization")
        if math.isinf(value):
            return "infinity" if value > 0 else "-infinity"
    return value


def report_json(report: CifReport, include_volatile: bool = True) -> str:
    """Canonical JSON: sorted keys, infinities as strings, volatile optional."""
    payload = _canonical(asdict(report))
    if not include_volatile:
        payload.pop("volatile")
    return json.dumps(payload, sort_keys=True, indent=1)


def config_hash(config: dict) -> str:
    blob = json.dumps(_canonical(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def gate_verdict(e_sim: float, diff: dict, wall_clock_s: float,
                 tau_sim: float, tau_complexity_s: float) -> tuple[bool, list]:
    """Pure gate: re-derivable from any report's scores and thresholds.

    Reason strings name the threshold only; measured values stay in the
    score fields so the strings are stable across runs.
    """
    reasons = []
    if not e_sim <= tau_sim:
        reasons.append(f"e_sim above tau_sim={tau_sim:g}")
    if not wall_clock_s <= tau_complexity_s:
        reasons.append(f"wall-clock at 256x256 above tau_complexity_s={tau_complexity_s:g}")
    if not diff["passed"]:
        if diff["claims_differentiable"]:
            reasons.append("gradient check failed")
        else:
            reasons.append("no gradient capability")
    return (not reasons), reasons


def _volatile_block(complexity: ComplexityScore) -> dict:
    return {
        "wall_clock_256_s": complexity.wall_clock_s,
        "hardware": complexity.hardware,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def build_report(
    fit: FittedCandidate,
    suite: Suite,
    sim: SimScore,
    complexity: ComplexityScore,
    diff: DiffScore,
    recon: ReconScore,
    tau_sim: float,
    tau_complexity_s: float,
    cfg_hash: str,
    lam_grid,
) -> CifReport:
    diff_block = {
        "claims_differentiable": diff.claims_differentiable,
        "passed": diff.passed,
        "max_rel_error": diff.max_rel_error,
        "trials": diff.trials,
        "reason": diff.reason,
    }
    selected, reasons = gate_verdict(sim.mean_sq_error, diff_block,
                                     complexity.wall_clock_s, tau_sim, tau_complexity_s)
    substitutions = list(_SUBSTITUTIONS)
    if recon.method == "tv":
        substitutions.append(
            "state adjoint unavailable; plain TV descent with the fitted state held fixed")
    return CifReport(
        candidate_id=fit.candidate_id,
        family=fit.family,
        theta_hash=fit.theta_hash(),
        e_sim=sim.mean_sq_error,
        e_sim_diagnostics={
            "per_image": sim.per_image,
            "long_exposure_psf_rel_l2": sim.long_exposure_psf_rel_l2,
            "tilt_mean_abs_px": sim.tilt_mean_abs_px,
        },
        e_complexity={
            "param_count": complexity.param_count,
            "madds_per_pixel": complexity.madds_per_pixel,
            "size": complexity.size,
            "structure": complexity.structure,
        },
        e_recon=recon.mean_psnr,
        e_recon_detail={
            "method": recon.method,
            "best_lambda": recon.best_lambda,
            "per_image_psnr": recon.per_image_psnr,
            "reason": recon.not_applicable,
        },
        e_diff=diff_block,
        thresholds={"tau_sim": tau_sim, "tau_complexity_s": tau_complexity_s},
        gate={"selected": selected, "reasons": reasons},
        provenance={
            "suite_hash": suite.hash,
            "suite_seed": suite.seed,
            "config_hash": cfg_hash,
            "sim_loss_metric": SIM_LOSS_METRIC,
            "lambda_grid": list(lam_grid),
            "fitting": fit.procedure,
            "substitutions": substitutions,
        },
        volatile=_volatile_block(complexity),
    )


def select_simulator(
    candidates,
    tau_sim: float = DEFAULT_TAU_SIM,
    tau_complexity_s: float = DEFAULT_TAU_COMPLEXITY_S,
    suite: Suite | None = None,
    *,
    recon_cfg: ReconConfig | None = None,
    lam_grid=RECON_LAMBDA_GRID,
    outer: int = 2,
    theta_steps: int = 6,
    complexity_size: int = 256,
    diff_trials: int = 50,
    cache: dict | None = None,
) -> list:
    """Score every candidate, gate, and rank.

    Returns reports for all candidates: survivors first, ranked by e_recon
    (descending, +infinity sentinel wins), ties broken by lower measured
    wall-clock then lexicographic id; gated-out candidates follow in id
    order with their full scores retained.  `cache` (theta hash -> score
    dict) is shared across calls with the same suite and config; complexity
    is measured once per distinct theta, so identical candidates tie
    deterministically.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if suite is None:
        raise ValueError("selection needs the committed suite")
    cache = cache if cache is not None else {}
    cfg = recon_cfg or ReconConfig(max_iter=60, tol=1e-6)
    cfg_hash = config_hash({
        "tau_sim": tau_sim,
        "tau_complexity_s": tau_complexity_s,
        "lambda_grid": list(lam_grid),
        "recon": asdict(cfg),
        "outer": outer,
        "theta_steps": theta_steps,
        "complexity_size": complexity_size,
        "diff_trials": diff_trials,
        "sim_loss_metric": SIM_LOSS_METRIC,
    })

    reports = []
    for fit in candidates:
        key = fit.theta_hash()
        scores = cache.get(key)
        if scores is None:
            complexity_handle = fit.complexity_handle or fit.handles[0]
            scores = {
                "sim": eval_sim_loss(fit, suite),
                "complexity": eval_complexity(complexity_handle, size=complexity_size),
                "diff": eval_diff(fit.handles[0], trials=diff_trials),
                "recon": eval_recon(fit, suite, cfg, lam_grid, outer=outer,
                                    theta_steps=theta_steps),
            }
            cache[key] = scores
        reports.append(build_report(
            fit, suite, scores["sim"], scores["complexity"], scores["diff"],
            scores["recon"], tau_sim, tau_complexity_s, cfg_hash, lam_grid))

    def recon_rank(r: CifReport):
        return r.e_recon if r.e_recon is not None else -math.inf

    survivors = [r for r in reports if r.gate["selected"]]
    gated = [r for r in reports if not r.gate["selected"]]
    survivors.sort(key=lambda r: (-recon_rank(r), r.volatile["wall_clock_256_s"],
                                  r.candidate_id))
    gated.sort(key=lambda r: r.candidate_id)
    return survivors + gated


def markdown_table(reports) -> str:
    """Summary table for docs; includes the volatile wall-clock column."""
    lines = [
        "| id | family | e_sim | madds/px | wall-clock 256 (s) | e_recon (dB) | grads | selected |",
        "| --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for r in reports:
        if r.e_recon is None:
            recon = "n/a"
        elif math.isinf(r.e_recon):
            recon = "inf"
        else:
            recon = f"{r.e_recon:.2f}"
        diff = "pass" if r.e_diff["passed"] else "fail"
        lines.append(
            f"| {r.candidate_id} | {r.family} | {r.e_sim:.3e} | "
            f"{r.e_complexity['madds_per_pixel']:.0f} | "
            f"{r.volatile['wall_clock_256_s']:.4f} | {recon} | {diff} | "
            f"{'yes' if r.gate['selected'] else 'no'} |")
    return "\n".join(lines) + "\n"
