"""Adaptive resource controller.

One run walks a (K, M) trajectory from (k0, m0): evaluate the bundle,
apply the active rule's gates, and on a candidate either declare success
(empirical rules) or spend one held-out confirmation attempt.  Otherwise
allocate: raise K while the stability score exceeds tolerance, double M
while the width does, and take final passes before conceding the
resource limit.

A single nested shadow batch of size m_max is drawn per run; every
evaluation reads a prefix, so the terminal sample count is the number of
shots that actually entered the decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import estimator, shadows, stopping
from .errors import ConfigError, ValidationError

#: published constant separating confirmation streams from exploration
CONFIRMATION_SEED_XOR = 0x9E3779B97F4A7C15

ACTIONS = (
    "inc_k",
    "double_m",
    "final_k_pass",
    "final_m_pass",
    "stop_success",
    "stop_resource_limit",
    "certificate_reject",
)


@dataclass(frozen=True)
class TrajectoryStep:
    iteration: int
    k: int
    m: int
    bundle: estimator.EstimateBundle
    gate_trace: stopping.GateTrace
    action: str
    certificate: Optional[stopping.CertificateRecord] = None


@dataclass(frozen=True)
class RunResult:
    steps: list[TrajectoryStep]
    decision: stopping.StopDecision
    n_eval: int
    m_final: int
    seed: int


def _remaining_m_levels(m: int, m_max: int) -> int:
    """Number of sample-count levels {m, 2m, ...} up to and including m_max."""
    levels = 1
    while m < m_max:
        m *= 2
        levels += 1
    return levels


def _gate_for_rule(
    b: estimator.EstimateBundle, cfg: stopping.StopConfig, patience: int
) -> tuple[stopping.GateTrace, bool]:
    """Per-rule gate evaluation: returns the trace and candidacy."""
    rule = cfg.rule
    if rule in ("component_aware", "heldout_component_aware"):
        trace = stopping.component_aware_test(b, cfg, patience)
        return trace, trace.patience_count >= cfg.patience
    if rule in ("width_only", "seq_heldout_width"):
        passed = stopping.width_only_test(b, cfg)
        trace = stopping.GateTrace(
            eligible_k=True,
            eligible_m=True,
            krylov_gate=b.d_k <= cfg.epsilon,
            sampling_gate=b.width <= cfg.epsilon,
            patience_count=1 if passed else 0,
        )
        return trace, passed
    if rule == "fixedK_heldout":
        passed = b.width <= cfg.epsilon
        trace = stopping.GateTrace(True, True, True, passed, 1 if passed else 0)
        return trace, passed
    raise ConfigError(f"rule {rule!r} does not run on the adaptive trajectory")


def run(
    instance,
    stop_cfg: stopping.StopConfig,
    boot_cfg: estimator.BootstrapConfig,
    seed: int,
    calib: Optional[stopping.CalibrationTable] = None,
) -> RunResult:
    """Execute one adaptive trajectory and return its terminal summary."""
    cfg = stop_cfg
    if cfg.rule == "sample_schedule":
        raise ConfigError("sample_schedule runs through run_sample_schedule")
    if cfg.rule == "heldout_component_aware" and calib is None:
        raise ConfigError("heldout_component_aware needs a calibration table")
    heldout = cfg.rule in stopping.HELDOUT_RULES

    est = estimator.KrylovShadowEstimator.for_instance(instance)
    key = (instance.config.n_qubits, instance.config.p_phi, instance.config.p_dep)
    batch = shadows.draw_snapshots(instance.rho, cfg.m_max, seed)

    k, m = cfg.k0, cfg.m0
    patience = 0
    attempts = 0
    j_max = cfg.j_max
    steps: list[TrajectoryStep] = []
    iteration = 0

    while True:
        iteration += 1
        b = est.bundle(batch, k, m, boot_cfg)
        trace, candidate = _gate_for_rule(b, cfg, patience)
        patience = trace.patience_count
        certificate = None

        if candidate:
            if not heldout:
                decision = stopping.StopDecision(
                    "success", k, m, b.f_hat, b.width, b.d_k, trace
                )
                steps.append(
                    TrajectoryStep(iteration, k, m, b, trace, "stop_success")
                )
                return RunResult(steps, decision, len(steps), m, seed)
            if j_max is None:
                j_max = _remaining_m_levels(m, cfg.m_max)
            if attempts < j_max:
                attempts += 1
                m_conf = cfg.m_conf if cfg.m_conf is not None else m
                conf_seed = (seed ^ CONFIRMATION_SEED_XOR) + attempts
                conf_batch = shadows.draw_snapshots(instance.rho, m_conf, conf_seed)
                certificate, certified = stopping.heldout_certificate(
                    k,
                    key,
                    calib if cfg.rule == "heldout_component_aware" else None,
                    conf_batch,
                    est,
                    cfg,
                    boot_cfg,
                    attempts,
                    j_max,
                )
                if certified:
                    decision = stopping.StopDecision(
                        "success",
                        k,
                        m,
                        certificate.conf_estimate,
                        b.width,
                        b.d_k,
                        trace,
                        certificate,
                    )
                    steps.append(
                        TrajectoryStep(
                            iteration, k, m, b, trace, "stop_success", certificate
                        )
                    )
                    return RunResult(steps, decision, len(steps), m, seed)
                patience = 0  # rejected: resume exploration

        if k >= cfg.k_max and m >= cfg.m_max:
            decision = stopping.StopDecision(
                "resource_limit", k, m, b.f_hat, b.width, b.d_k, trace, certificate
            )
            steps.append(
                TrajectoryStep(
                    iteration, k, m, b, trace, "stop_resource_limit", certificate
                )
            )
            return RunResult(steps, decision, len(steps), m, seed)

        if b.d_k > cfg.epsilon and k < cfg.k_max:
            action, next_k, next_m = "inc_k", k + 1, m
        elif b.width > cfg.epsilon and m < cfg.m_max:
            action, next_k, next_m = "double_m", k, m * 2
        elif k < cfg.k_max:
            action, next_k, next_m = "final_k_pass", k + 1, m
        else:
            action, next_k, next_m = "final_m_pass", k, m * 2
        # a rejected attempt labels the step; the allocation still applies
        label = "certificate_reject" if certificate is not None else action
        steps.append(TrajectoryStep(iteration, k, m, b, trace, label, certificate))
        k, m = next_k, next_m


def run_to_limit(
    instance,
    stop_cfg: stopping.StopConfig,
    boot_cfg: estimator.BootstrapConfig,
    seed: int,
) -> list[TrajectoryStep]:
    """Drive the allocation loop to the resource limit, never stopping.

    The allocation path is independent of the eligibility and patience
    gates, so recorded steps can be replayed offline under any gate
    setting (the threshold-ablation driver).
    """
    cfg = stop_cfg
    est = estimator.KrylovShadowEstimator.for_instance(instance)
    batch = shadows.draw_snapshots(instance.rho, cfg.m_max, seed)
    k, m = cfg.k0, cfg.m0
    steps: list[TrajectoryStep] = []
    iteration = 0
    blank = stopping.GateTrace(False, False, False, False, 0)
    while True:
        iteration += 1
        b = est.bundle(batch, k, m, boot_cfg)
        if k >= cfg.k_max and m >= cfg.m_max:
            steps.append(TrajectoryStep(iteration, k, m, b, blank, "stop_resource_limit"))
            return steps
        if b.d_k > cfg.epsilon and k < cfg.k_max:
            action, next_k, next_m = "inc_k", k + 1, m
        elif b.width > cfg.epsilon and m < cfg.m_max:
            action, next_k, next_m = "double_m", k, m * 2
        elif k < cfg.k_max:
            action, next_k, next_m = "final_k_pass", k + 1, m
        else:
            action, next_k, next_m = "final_m_pass", k, m * 2
        steps.append(TrajectoryStep(iteration, k, m, b, blank, action))
        k, m = next_k, next_m


def replay_component_aware(
    steps: list[TrajectoryStep], cfg: stopping.StopConfig
) -> tuple[str, int]:
    """Apply component-aware gates to a recorded trajectory.

    Returns the outcome and the index of the terminal step.  Valid
    because allocation never consults the gates.
    """
    patience = 0
    for i, step in enumerate(steps):
        trace = stopping.component_aware_test(step.bundle, cfg, patience)
        patience = trace.patience_count
        if patience >= cfg.patience:
            return "success", i
    return "resource_limit", len(steps) - 1


def run_sample_schedule(
    instance,
    fixed_k: int,
    m_schedule: list[int],
    stop_cfg: stopping.StopConfig,
    boot_cfg: estimator.BootstrapConfig,
    seed: int,
) -> RunResult:
    """Fixed-order run over a declared, strictly increasing M schedule.

    The persistence rule needs the width gate at ``patience`` consecutive
    levels, or a single pass at the predeclared terminal level; the
    width-only baseline stops at its first severity pass.
    """
    cfg = stop_cfg
    if fixed_k < 1:
        raise ValidationError(f"fixed_k must be >= 1, got {fixed_k}")
    if fixed_k > instance.rho.shape[0]:
        raise ValidationError("fixed_k exceeds the Hilbert-space dimension")
    if len(m_schedule) < 1 or any(
        m2 <= m1 for m1, m2 in zip(m_schedule, m_schedule[1:])
    ):
        raise ValidationError("m_schedule must be strictly increasing and non-empty")
    if cfg.rule not in ("sample_schedule", "width_only"):
        raise ConfigError(f"rule {cfg.rule!r} does not run on a sample schedule")

    est = estimator.KrylovShadowEstimator.for_instance(instance)
    batch = shadows.draw_snapshots(instance.rho, m_schedule[-1], seed)
    steps: list[TrajectoryStep] = []
    bundles: list[estimator.EstimateBundle] = []
    total = len(m_schedule)

    for i, m in enumerate(m_schedule):
        b = est.bundle(batch, fixed_k, m, boot_cfg)
        bundles.append(b)
        if cfg.rule == "width_only":
            ok = stopping.width_only_test(b, cfg)
        else:
            ok = stopping.sample_schedule_test(bundles, cfg, total)
        passed = b.width <= cfg.epsilon
        trace = stopping.GateTrace(True, True, True, passed, 1 if passed else 0)
        if ok:
            decision = stopping.StopDecision("success", fixed_k, m, b.f_hat, b.width, b.d_k, trace)
            steps.append(TrajectoryStep(i + 1, fixed_k, m, b, trace, "stop_success"))
            return RunResult(steps, decision, len(steps), m, seed)
        if i + 1 == total:
            decision = stopping.StopDecision(
                "resource_limit", fixed_k, m, b.f_hat, b.width, b.d_k, trace
            )
            steps.append(TrajectoryStep(i + 1, fixed_k, m, b, trace, "stop_resource_limit"))
            return RunResult(steps, decision, len(steps), m, seed)
        steps.append(TrajectoryStep(i + 1, fixed_k, m, b, trace, "double_m"))
