"""Benchmark harness: replicate grids, metrics, ablation, and CSV output.

Replicate seeds are a stable 64-bit hash of (base_seed, p_phi,
replicate) so every rule at the same grid point sees the same shadow
batch (matched draws); bootstrap and confirmation streams derive from
the run seed through published constants.  All CSV output is
deterministic: floats are written with round-trip repr and rows are
sorted, so identical configs reproduce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats as _sstats

from . import controller, krylov, stopping
from .benchmark import BenchmarkInstance, NoiseConfig, build_instance
from .errors import ConfigError, FitError, ShadowQfiError
from .estimator import BootstrapConfig

#: published constant separating bootstrap streams from measurement streams
BOOTSTRAP_SEED_XOR = 0xD1B54A32D192ED03

DEFAULT_P_PHI_GRID = (0.0, 0.06, 0.12, 0.18, 0.24)
DEFAULT_RULES = ("width_only", "component_aware")

RUNS_COLUMNS = [
    "run_id", "rule", "n", "p_phi", "p_dep", "epsilon", "k_final", "m_final",
    "f_hat", "f_ref", "abs_err", "rel_err", "width", "d_k", "outcome",
    "false_stop", "n_eval", "seed", "r_trunc", "r_stat", "delta_j",
    "attempt_index", "j_max", "conf_estimate", "conf_m",
    "degenerate_bootstrap_count",
]

SUMMARY_COLUMNS = [
    "rule", "p_phi", "n_runs", "n_success", "n_false_stop", "fsr", "fsr_lo",
    "fsr_hi", "sr", "sr_lo", "sr_hi", "sp", "median_abs_err",
    "median_m_final", "m_final_q25", "m_final_q75",
]

CALIBRATION_COLUMNS = ["n", "p_phi", "p_dep", "K", "F_K", "B_abs"]

TRAJECTORY_COLUMNS = [
    "run_id", "rule", "iteration", "k", "m", "f_hat", "width", "d_k",
    "action", "f_ref", "epsilon",
]

DECAY_COLUMNS = ["n", "p_phi", "p_dep", "K", "f_k", "b_abs", "d_k_pop"]
DECAY_FIT_COLUMNS = ["n", "p_phi", "p_dep", "series", "mu_hat", "ci_lo", "ci_hi", "n_points"]


@dataclass(frozen=True)
class GridSpec:
    """One reliability experiment: noise grid, rules, tolerance, seeding."""

    n_qubits: int = 4
    p_phi_list: Sequence[float] = DEFAULT_P_PHI_GRID
    p_dep: float = 0.03
    alpha: float = 0.25
    replicates: int = 50
    rules: Sequence[str] = DEFAULT_RULES
    epsilon: Optional[float] = 0.2
    epsilon_rel: Optional[float] = None
    base_seed: int = 20240501
    # fixed-K sample schedule mode (recalibration control); None for adaptive
    schedule_fixed_k: Optional[int] = None
    schedule_m_levels: Optional[Sequence[int]] = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if (self.epsilon is None) == (self.epsilon_rel is None):
            raise ConfigError("exactly one of epsilon / epsilon_rel must be set")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.epsilon_rel is not None and self.epsilon_rel <= 0:
            raise ConfigError("epsilon_rel must be > 0")
        for rule in self.rules:
            if rule not in stopping.RULES:
                raise ConfigError(f"unknown rule {rule!r}")
        if (self.schedule_fixed_k is None) != (self.schedule_m_levels is None):
            raise ConfigError("schedule_fixed_k and schedule_m_levels go together")


@dataclass(frozen=True)
class RunRecord:
    """Flat per-replicate row of the reliability benchmark."""

    run_id: str
    rule: str
    n: int
    p_phi: float
    p_dep: float
    epsilon: float
    k_final: int
    m_final: int
    f_hat: float
    f_ref: float
    abs_err: float
    rel_err: float
    width: float
    d_k: float
    outcome: str
    false_stop: bool
    n_eval: int
    seed: int
    r_trunc: Optional[float] = None
    r_stat: Optional[float] = None
    delta_j: Optional[float] = None
    attempt_index: Optional[int] = None
    j_max: Optional[int] = None
    conf_estimate: Optional[float] = None
    conf_m: Optional[int] = None
    degenerate_bootstrap_count: int = 0


@dataclass(frozen=True)
class GridSummary:
    rule: str
    p_phi: float
    n_runs: int
    n_success: int
    n_false_stop: int
    fsr: float
    fsr_lo: float
    fsr_hi: float
    sr: float
    sr_lo: float
    sr_hi: float
    sp: Optional[float]
    median_abs_err: float
    median_m_final: float
    m_final_q25: float
    m_final_q75: float


def stable_hash64(*parts) -> int:
    """Deterministic 64-bit hash of the reprs of the parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def replicate_seed(base_seed: int, p_phi: float, replicate: int) -> int:
    """Run seed shared by every rule at the same grid point (matched draws)."""
    return stable_hash64(base_seed, round(float(p_phi), 12), replicate)


def resolve_epsilon(spec: GridSpec, f_ref: float) -> float:
    """Absolute tolerance for one instance; relative targets resolve here,
    before any run starts, so the decision layer never sees f_ref."""
    if spec.epsilon is not None:
        return spec.epsilon
    return spec.epsilon_rel * f_ref


def _record_from_result(
    res: controller.RunResult,
    rule: str,
    inst: BenchmarkInstance,
    epsilon: float,
    run_id: str,
) -> RunRecord:
    d = res.decision
    abs_err = abs(d.f_hat - inst.f_ref)
    cert = d.certificate
    degen = sum(s.bundle.degenerate_boot for s in res.steps)
    return RunRecord(
        run_id=run_id,
        rule=rule,
        n=inst.config.n_qubits,
        p_phi=inst.config.p_phi,
        p_dep=inst.config.p_dep,
        epsilon=epsilon,
        k_final=d.k_final,
        m_final=d.m_final,
        f_hat=d.f_hat,
        f_ref=inst.f_ref,
        abs_err=abs_err,
        rel_err=abs_err / inst.f_ref if inst.f_ref > 0 else math.nan,
        width=d.width,
        d_k=d.d_k,
        outcome=d.outcome,
        false_stop=(d.outcome == "success" and abs_err > epsilon),
        n_eval=res.n_eval,
        seed=res.seed,
        r_trunc=cert.r_trunc if cert else None,
        r_stat=cert.r_stat if cert else None,
        delta_j=cert.delta_j if cert else None,
        attempt_index=cert.attempt_index if cert else None,
        j_max=cert.j_max if cert else None,
        conf_estimate=cert.conf_estimate if cert else None,
        conf_m=cert.conf_m if cert else None,
        degenerate_bootstrap_count=degen,
    )


def _run_one(task) -> tuple[RunRecord, list[tuple]]:
    """Worker: one replicate.  Returns the record and trajectory rows.

    A numerical failure inside the run becomes a row with outcome
    "error" rather than killing the grid; it counts against the rate
    denominators exactly like a resource-limit termination.
    """
    (spec, stop_base, boot_base, rule, p_phi, rep, calib_rows) = task
    inst = build_instance(
        NoiseConfig(spec.n_qubits, p_phi, spec.p_dep, alpha=spec.alpha)
    )
    epsilon = resolve_epsilon(spec, inst.f_ref)
    seed = replicate_seed(spec.base_seed, p_phi, rep)
    stop_cfg = replace(stop_base, epsilon=epsilon, rule=rule)
    boot_cfg = replace(boot_base, seed=seed ^ BOOTSTRAP_SEED_XOR)
    calib = stopping.CalibrationTable(calib_rows) if calib_rows is not None else None
    run_id = f"{rule}-p{p_phi:g}-r{rep:03d}"

    try:
        if spec.schedule_fixed_k is not None:
            res = controller.run_sample_schedule(
                inst, spec.schedule_fixed_k, list(spec.schedule_m_levels),
                stop_cfg, boot_cfg, seed,
            )
        else:
            res = controller.run(inst, stop_cfg, boot_cfg, seed, calib=calib)
    except ConfigError:
        raise  # misconfiguration aborts the whole grid
    except (ShadowQfiError, FloatingPointError, np.linalg.LinAlgError):
        record = RunRecord(
            run_id=run_id, rule=rule, n=inst.config.n_qubits, p_phi=p_phi,
            p_dep=inst.config.p_dep, epsilon=epsilon, k_final=stop_cfg.k0,
            m_final=stop_cfg.m0, f_hat=math.nan, f_ref=inst.f_ref,
            abs_err=math.nan, rel_err=math.nan, width=math.nan, d_k=math.nan,
            outcome="error", false_stop=False, n_eval=0, seed=seed,
        )
        return record, []
    record = _record_from_result(res, rule, inst, epsilon, run_id)
    traj = [
        (run_id, rule, s.iteration, s.k, s.m, s.bundle.f_hat, s.bundle.width,
         s.bundle.d_k, s.action, inst.f_ref, epsilon)
        for s in res.steps
    ]
    return record, traj


def run_grid(
    spec: GridSpec,
    stop_cfg: stopping.StopConfig,
    boot_cfg: BootstrapConfig,
    jobs: int = 1,
    calib: Optional[stopping.CalibrationTable] = None,
) -> tuple[list[RunRecord], list[GridSummary], list[tuple]]:
    """Run every (rule, p_phi, replicate) cell and aggregate summaries.

    Results are sorted by (rule, p_phi, replicate) after the pool joins,
    so the output is independent of worker scheduling.
    """
    calib_rows = (
        [(n, pp, pd, k, v) for (n, pp, pd, k), v in calib._rows.items()]
        if calib is not None
        else None
    )
    tasks = [
        (spec, stop_cfg, boot_cfg, rule, p_phi, rep, calib_rows)
        for rule in spec.rules
        for p_phi in spec.p_phi_list
        for rep in range(spec.replicates)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=4))
    else:
        results = [_run_one(t) for t in tasks]
    order = sorted(
        range(len(tasks)), key=lambda i: (tasks[i][3], tasks[i][4], tasks[i][5])
    )
    records = [results[i][0] for i in order]
    trajectories = [row for i in order for row in results[i][1]]
    return records, summarize(records), trajectories


def summarize(records: Iterable[RunRecord]) -> list[GridSummary]:
    """FSR / SR / SP with Wilson intervals per (rule, p_phi) cell."""
    cells: dict[tuple[str, float], list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.rule, r.p_phi), []).append(r)
    out = []
    for (rule, p_phi) in sorted(cells):
        rows = cells[(rule, p_phi)]
        n = len(rows)
        n_succ = sum(r.outcome == "success" for r in rows)
        n_false = sum(r.false_stop for r in rows)
        fsr_lo, fsr_hi = stopping.wilson_interval(n_false, n)
        sr_lo, sr_hi = stopping.wilson_interval(n_succ, n)
        m_final = np.array([r.m_final for r in rows], dtype=float)
        out.append(
            GridSummary(
                rule=rule,
                p_phi=p_phi,
                n_runs=n,
                n_success=n_succ,
                n_false_stop=n_false,
                fsr=n_false / n,
                fsr_lo=fsr_lo,
                fsr_hi=fsr_hi,
                sr=n_succ / n,
                sr_lo=sr_lo,
                sr_hi=sr_hi,
                sp=(n_succ - n_false) / n_succ if n_succ > 0 else None,
                median_abs_err=float(np.median([r.abs_err for r in rows])),
                median_m_final=float(np.median(m_final)),
                m_final_q25=float(np.quantile(m_final, 0.25)),
                m_final_q75=float(np.quantile(m_final, 0.75)),
            )
        )
    return out


# -- threshold ablation -------------------------------------------------------


def run_ablation(
    spec: GridSpec,
    stop_cfg: stopping.StopConfig,
    boot_cfg: BootstrapConfig,
    k_min_set: Sequence[int] = (2, 4, 6),
    m_min_set: Sequence[int] = (32, 128, 256),
    p_set: Sequence[int] = (1, 2, 3),
    p_phi: float = 0.12,
    jobs: int = 1,
) -> list[dict]:
    """Sweep component-aware gate settings at one noise point.

    The allocation path never consults the gates, so each replicate's
    full trajectory is recorded once and every gate cell is replayed
    over it; this is exactly equivalent to running each cell separately.
    """
    inst = build_instance(
        NoiseConfig(spec.n_qubits, p_phi, spec.p_dep, alpha=spec.alpha)
    )
    epsilon = resolve_epsilon(spec, inst.f_ref)
    base = replace(stop_cfg, epsilon=epsilon, rule="component_aware")

    tasks = [
        (inst, base, replace(boot_cfg, seed=replicate_seed(spec.base_seed, p_phi, rep) ^ BOOTSTRAP_SEED_XOR),
         replicate_seed(spec.base_seed, p_phi, rep))
        for rep in range(spec.replicates)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trajectories = list(pool.map(_trajectory_task, tasks, chunksize=1))
    else:
        trajectories = [_trajectory_task(t) for t in tasks]

    cells = []
    for k_min in k_min_set:
        for m_min in m_min_set:
            for pat in p_set:
                cfg = replace(base, k_min_stop=k_min, m_min_stop=m_min, patience=pat)
                n_succ = n_false = 0
                for steps in trajectories:
                    outcome, idx = controller.replay_component_aware(steps, cfg)
                    if outcome == "success":
                        n_succ += 1
                        err = abs(steps[idx].bundle.f_hat - inst.f_ref)
                        n_false += err > epsilon
                n = len(trajectories)
                cells.append(
                    {
                        "k_min_stop": k_min,
                        "m_min_stop": m_min,
                        "patience": pat,
                        "n_runs": n,
                        "n_success": n_succ,
                        "n_false_stop": n_false,
                        "fsr": n_false / n,
                        "sr": n_succ / n,
                        "is_default": (k_min, m_min, pat) == (4, 128, 2),
                    }
                )
    return cells


def _trajectory_task(task):
    inst, cfg, boot_cfg, seed = task
    return controller.run_to_limit(inst, cfg, boot_cfg, seed)


# -- decay fits ---------------------------------------------------------------


def fit_decay(series: Iterable[tuple[int, float]]) -> tuple[float, float, float]:
    """OLS fit of log(value) on K; returns (mu_hat, ci_lo, ci_hi).

    Non-positive values are dropped; fewer than three usable points is
    an error.  The 95% interval transforms the slope's t-interval.
    """
    pts = [(int(k), float(v)) for k, v in series if v > 0]
    if len(pts) < 3:
        raise FitError(f"decay fit needs >= 3 positive points, got {len(pts)}")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.log([p[1] for p in pts])
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xm)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    t = float(_sstats.t.ppf(0.975, dof)) if dof > 0 else 0.0
    return math.exp(slope), math.exp(slope - t * se), math.exp(slope + t * se)


def decay_series(instance: BenchmarkInstance, k_max: int) -> list[dict]:
    """Population rows (K, F_K, |B_K|, |F_K - F_{K-1}|) for decay analysis."""
    rows = krylov.population_table(instance, k_max)
    out = []
    prev = None
    for (k, f_k, b_abs) in rows:
        out.append(
            {
                "n": instance.config.n_qubits,
                "p_phi": instance.config.p_phi,
                "p_dep": instance.config.p_dep,
                "K": k,
                "f_k": f_k,
                "b_abs": b_abs,
                "d_k_pop": abs(f_k - prev) if prev is not None else None,
            }
        )
        prev = f_k
    return out


def fit_decay_rows(rows: list[dict], series: str) -> dict:
    """Fit one decay series over K >= 2.

    The K=1 row is the forced zero-order point (the order-1 functional
    vanishes identically), so it reflects initialization rather than
    decay and is excluded from the fit.
    """
    pts = [(r["K"], r[series]) for r in rows if r["K"] >= 2 and r[series] is not None]
    mu, lo, hi = fit_decay(pts)
    first = rows[0]
    return {
        "n": first["n"],
        "p_phi": first["p_phi"],
        "p_dep": first["p_dep"],
        "series": series,
        "mu_hat": mu,
        "ci_lo": lo,
        "ci_hi": hi,
        "n_points": len([p for p in pts if p[1] > 0]),
    }


# -- calibration tables -------------------------------------------------------


def make_calibration_rows(spec: GridSpec, k_max: int) -> list[dict]:
    """Population truncation-bias rows for every grid point."""
    rows = []
    for p_phi in spec.p_phi_list:
        inst = build_instance(
            NoiseConfig(spec.n_qubits, p_phi, spec.p_dep, alpha=spec.alpha)
        )
        for (k, f_k, b_abs) in krylov.population_table(inst, k_max):
            rows.append(
                {
                    "n": spec.n_qubits,
                    "p_phi": p_phi,
                    "p_dep": spec.p_dep,
                    "K": k,
                    "F_K": f_k,
                    "B_abs": b_abs,
                }
            )
    return rows


def calibration_table_from_rows(rows: list[dict]) -> stopping.CalibrationTable:
    table = stopping.CalibrationTable()
    for r in rows:
        table.add(r["n"], r["p_phi"], r["p_dep"], r["K"], r["B_abs"])
    return table


# -- CSV I/O ------------------------------------------------------------------


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def _parse_value(s: str, as_type):
    if s == "":
        return None
    if as_type is bool:
        return s == "true"
    if as_type is float:
        return math.inf if s == "inf" else float(s)
    return as_type(s)


def config_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def write_csv(path, columns: list[str], rows: Iterable[dict], metadata: dict) -> None:
    """CSV with '#'-prefixed metadata lines, then a header row.

    The metadata carries the config hash, seed, and version; no
    timestamps, so identical inputs give identical bytes.
    """
    buf = io.StringIO()
    for key in sorted(metadata):
        buf.write(f"# {key}={metadata[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_value(row.get(c)) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> tuple[list[dict], dict]:
    metadata = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key.strip()] = value
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [dict(zip(columns, vals)) for vals in reader]
    return rows, metadata


_RUNS_TYPES = {
    "run_id": str, "rule": str, "n": int, "p_phi": float, "p_dep": float,
    "epsilon": float, "k_final": int, "m_final": int, "f_hat": float,
    "f_ref": float, "abs_err": float, "rel_err": float, "width": float,
    "d_k": float, "outcome": str, "false_stop": bool, "n_eval": int,
    "seed": int, "r_trunc": float, "r_stat": float, "delta_j": float,
    "attempt_index": int, "j_max": int, "conf_estimate": float,
    "conf_m": int, "degenerate_bootstrap_count": int,
}


def write_runs_csv(path, records: list[RunRecord], metadata: dict) -> None:
    rows = [{c: getattr(r, c) for c in RUNS_COLUMNS} for r in records]
    write_csv(path, RUNS_COLUMNS, rows, metadata)


def read_runs_csv(path) -> tuple[list[RunRecord], dict]:
    rows, metadata = read_csv(path)
    records = []
    for row in rows:
        kwargs = {c: _parse_value(row[c], _RUNS_TYPES[c]) for c in RUNS_COLUMNS}
        records.append(RunRecord(**kwargs))
    return records, metadata


def write_summary_csv(path, summaries: list[GridSummary], metadata: dict) -> None:
    rows = [{c: getattr(s, c) for c in SUMMARY_COLUMNS} for s in summaries]
    write_csv(path, SUMMARY_COLUMNS, rows, metadata)
