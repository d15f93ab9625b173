"""Stopping policies, certificate checks, and threshold calibrators.

Six rules share one configuration type:

* ``width_only``          stop when max{d_K, w_M} <= eps
* ``component_aware``     eligibility gates + componentwise passes + patience
* ``sample_schedule``     fixed-K width persistence over declared M levels
* ``seq_heldout_width``   width-only candidate + held-out statistical radius
* ``fixedK_heldout``      locked K + held-out statistical radius
* ``heldout_component_aware``  component-aware candidate + truncation-radius
  certificate read from a calibration table

The closed-form calibrators (minimum order, minimum sample count,
patience suppression) and the Wilson interval live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import stats

from . import estimator, shadows
from .errors import ConfigError, ValidationError

RULES = (
    "width_only",
    "component_aware",
    "sample_schedule",
    "seq_heldout_width",
    "fixedK_heldout",
    "heldout_component_aware",
)
HELDOUT_RULES = frozenset({"seq_heldout_width", "fixedK_heldout", "heldout_component_aware"})
SPENDING_SCHEMES = ("bonferroni", "summable")


@dataclass(frozen=True)
class StopConfig:
    """Tolerance, risk, gates, resource limits, and the active rule.

    ``epsilon`` is always absolute here; a relative target is resolved
    to an absolute value by the harness before any run starts, so the
    decision layer never sees the reference value.
    """

    epsilon: float
    delta: float = 0.1
    k_min_stop: int = 4
    m_min_stop: int = 128
    patience: int = 2
    k_max: int = 8
    m_max: int = 512
    k0: int = 1
    m0: int = 16
    rule: str = "component_aware"
    j_max: Optional[int] = None
    m_conf: Optional[int] = None
    spending: str = "bonferroni"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.spending not in SPENDING_SCHEMES:
            raise ConfigError(f"unknown spending scheme {self.spending!r}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        for name in ("k_min_stop", "m_min_stop", "patience", "k_max", "m_max", "k0", "m0"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.k0 > self.k_max or self.m0 > self.m_max:
            raise ConfigError("initial resources exceed the resource limits")
        if self.rule in ("component_aware", "heldout_component_aware"):
            if self.k_min_stop > self.k_max or self.m_min_stop > self.m_max:
                raise ConfigError(
                    "component-aware gates need k_min_stop <= k_max and m_min_stop <= m_max"
                )
        if self.rule == "fixedK_heldout" and self.k0 != self.k_max:
            raise ConfigError("fixedK_heldout locks the order: set k0 == k_max")
        if self.j_max is not None and self.j_max < 1:
            raise ConfigError("j_max must be a positive integer")
        if self.m_conf is not None and self.m_conf < 2:
            raise ConfigError("m_conf must be >= 2")


@dataclass(frozen=True)
class GateTrace:
    """Gate outcomes at one step; patience resets on any failure."""

    eligible_k: bool
    eligible_m: bool
    krylov_gate: bool
    sampling_gate: bool
    patience_count: int


@dataclass(frozen=True)
class CertificateRecord:
    r_trunc: float
    r_stat: float
    delta_j: float
    attempt_index: int
    j_max: int
    conf_estimate: float
    conf_m: int


@dataclass(frozen=True)
class StopDecision:
    """Terminal record of an adaptive run."""

    outcome: str  # "success" | "resource_limit"
    k_final: int
    m_final: int
    f_hat: float
    width: float
    d_k: float
    gate_trace: GateTrace
    certificate: Optional[CertificateRecord] = None


def width_only_test(b: estimator.EstimateBundle, cfg: StopConfig) -> bool:
    """Stop when the severity score max{d_K, w_M} falls below tolerance."""
    return estimator.severity(b) <= cfg.epsilon


def component_aware_test(
    b: estimator.EstimateBundle, cfg: StopConfig, patience_count: int = 0
) -> GateTrace:
    """Evaluate eligibility and component gates, updating the patience count.

    The Krylov gate passes on local stability or, by the finite-resource
    convention, on reaching k_max.  All four gates must hold to increment
    patience; any failure resets it to zero.
    """
    eligible_k = b.k >= cfg.k_min_stop
    eligible_m = b.m >= cfg.m_min_stop
    krylov_gate = (b.d_k <= cfg.epsilon) or (b.k == cfg.k_max)
    sampling_gate = b.width <= cfg.epsilon
    if eligible_k and eligible_m and krylov_gate and sampling_gate:
        patience_count += 1
    else:
        patience_count = 0
    return GateTrace(eligible_k, eligible_m, krylov_gate, sampling_gate, patience_count)


def sample_schedule_test(
    history: list[estimator.EstimateBundle], cfg: StopConfig, total_levels: int
) -> bool:
    """Width persistence over a declared sample-count schedule.

    Success needs the width gate to pass at ``patience`` consecutive
    levels, except at the terminal level where a single pass suffices.
    """
    if not history:
        return False
    passes = [b.width <= cfg.epsilon for b in history]
    p = cfg.patience
    if len(passes) >= p and all(passes[-p:]):
        return True
    return len(history) == total_levels and passes[-1]


def alpha_spend(delta: float, attempt_index: int, j_max: int, scheme: str = "bonferroni") -> float:
    """Per-attempt risk budget; Bonferroni splits evenly, the summable
    schedule 6*delta/(pi^2 j^2) supports open horizons."""
    if attempt_index < 1:
        raise ValidationError("attempt_index starts at 1")
    if scheme == "bonferroni":
        if j_max < 1:
            raise ConfigError("bonferroni spending needs j_max >= 1")
        return delta / j_max
    if scheme == "summable":
        return 6.0 * delta / (math.pi**2 * attempt_index**2)
    raise ConfigError(f"unknown spending scheme {scheme!r}")


class CalibrationTable:
    """Pre-registered truncation-bias magnitudes keyed by instance and order."""

    _ROUND = 12

    def __init__(self, rows=None):
        self._rows: dict[tuple[int, float, float, int], float] = {}
        for row in rows or []:
            self.add(*row)

    @staticmethod
    def _key(n: int, p_phi: float, p_dep: float, k: int):
        return (int(n), round(float(p_phi), CalibrationTable._ROUND),
                round(float(p_dep), CalibrationTable._ROUND), int(k))

    def add(self, n: int, p_phi: float, p_dep: float, k: int, b_abs: float) -> None:
        self._rows[self._key(n, p_phi, p_dep, k)] = float(b_abs)

    def lookup(self, n: int, p_phi: float, p_dep: float, k: int) -> float:
        key = self._key(n, p_phi, p_dep, k)
        if key not in self._rows:
            raise ConfigError(
                f"calibration table has no row for n={n}, p_phi={p_phi}, "
                f"p_dep={p_dep}, K={k}"
            )
        return self._rows[key]

    def __len__(self) -> int:
        return len(self._rows)


def heldout_certificate(
    candidate_k: int,
    instance_key: tuple[int, float, float],
    calib: Optional[CalibrationTable],
    conf_batch: shadows.ShadowBatch,
    est: estimator.KrylovShadowEstimator,
    cfg: StopConfig,
    boot_cfg: estimator.BootstrapConfig,
    attempt_index: int,
    j_max: int,
) -> tuple[CertificateRecord, bool]:
    """Confirmation-batch radius test with alpha spending.

    The statistical radius is the larger half-width of the held-out
    bootstrap interval at level 1 - delta_j around the confirmation
    estimate.  The truncation radius comes from the calibration table
    when one is supplied (component-aware certificates); the width-only
    and locked-K variants test the statistical radius alone.
    """
    delta_j = alpha_spend(cfg.delta, attempt_index, j_max, cfg.spending)
    if calib is not None:
        n, p_phi, p_dep = instance_key
        r_trunc = calib.lookup(n, p_phi, p_dep, candidate_k)
    else:
        r_trunc = 0.0
    m_conf = len(conf_batch)
    conf_cfg = estimator.BootstrapConfig(
        replicates=boot_cfg.replicates,
        level=1.0 - delta_j,
        seed=boot_cfg.seed ^ (0xC0F1D0 + attempt_index),
    )
    conf_est = est.estimate(conf_batch, candidate_k, m_conf)
    lower, upper, _ = est.bootstrap_interval(conf_batch, candidate_k, m_conf, conf_cfg)
    r_stat = max(abs(conf_est - lower), abs(upper - conf_est))
    record = CertificateRecord(
        r_trunc=r_trunc,
        r_stat=r_stat,
        delta_j=delta_j,
        attempt_index=attempt_index,
        j_max=j_max,
        conf_estimate=conf_est,
        conf_m=m_conf,
    )
    return record, (r_trunc + r_stat) <= cfg.epsilon


# -- closed-form calibrators ------------------------------------------------


def k_min_formula(c_trunc: float, mu: float, epsilon: float) -> int:
    """Minimum order max{1, ceil(log(2C/eps) / log(1/mu))}.

    Raises when mu >= 1: the geometric bias model diverges and no finite
    order certifies the truncation side.
    """
    if c_trunc <= 0 or epsilon <= 0:
        raise ValidationError("c_trunc and epsilon must be positive")
    if not 0.0 < mu < 1.0:
        raise ConfigError(
            f"decay rate mu={mu} outside (0, 1): minimum order diverges; "
            "increase the resource limit or recalibrate"
        )
    return max(1, math.ceil(math.log(2.0 * c_trunc / epsilon) / math.log(1.0 / mu)))


def m_min_formula(sigma_k: float, epsilon: float, delta: float, beta_bar: float = 0.0) -> int:
    """Minimum sample count ceil(2 sigma^2 log(2/delta) / (eps/2 - beta)^2).

    With beta_bar = 0 this equals ceil(8 sigma^2 log(2/delta) / eps^2).
    A bias bound at or above eps/2 makes the target unreachable by
    sampling alone and raises instead.
    """
    if sigma_k <= 0 or epsilon <= 0:
        raise ValidationError("sigma_k and epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if beta_bar < 0:
        raise ValidationError("beta_bar must be >= 0")
    headroom = epsilon / 2.0 - beta_bar
    if headroom <= 0:
        raise ConfigError(
            f"bias bound {beta_bar} >= eps/2 = {epsilon / 2}: more samples "
            "alone cannot certify the claim"
        )
    return math.ceil(2.0 * sigma_k**2 * math.log(2.0 / delta) / headroom**2)


def patience_model(p_bad: float, patience: int) -> float:
    """Idealized chance of `patience` consecutive false readings."""
    if not 0.0 < p_bad < 1.0:
        raise ValidationError(f"p_bad must lie in (0, 1), got {p_bad}")
    if patience < 1:
        raise ValidationError("patience must be >= 1")
    return p_bad**patience


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValidationError("successes must lie in [0, trials]")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    z = float(stats.norm.ppf(0.5 * (1.0 + level)))
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z**2 / (4.0 * trials**2))
    # the endpoints are exact at the boundary counts; avoid fp residue
    lower = 0.0 if successes == 0 else max(0.0, center - half)
    upper = 1.0 if successes == trials else min(1.0, center + half)
    return (lower, upper)


def error_envelope(
    c_trunc: float,
    mu: float,
    sigma_k: float,
    beta: float,
    k: int,
    m: int,
    delta: float,
) -> tuple[float, float]:
    """Calibrated radii (C mu^K, beta + sigma sqrt(2 log(2/delta) / M))."""
    if not 0.0 < mu < 1.0:
        raise ValidationError(f"mu must lie in (0, 1), got {mu}")
    if min(c_trunc, sigma_k) <= 0 or beta < 0 or k < 1 or m < 1:
        raise ValidationError("envelope parameters out of range")
    i_trunc = c_trunc * mu**k
    i_stat = beta + sigma_k * math.sqrt(2.0 * math.log(2.0 / delta) / m)
    return i_trunc, i_stat


def envelope_certified(i_trunc: float, i_stat: float, epsilon: float) -> bool:
    """Both calibrated radii controlled at half-tolerance scale."""
    return i_trunc <= epsilon / 2.0 and i_stat <= epsilon / 2.0
