"""Command-line interface for the benchmark harness.

Subcommands: estimate, grid, ablation, calibrate, decay-fit, report.
Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import __version__, harness, stopping
from .benchmark import NoiseConfig, build_instance
from .controller import run
from .errors import ConfigError, ShadowQfiError
from .estimator import BootstrapConfig


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory for CSV files")
    p.add_argument("--seed", type=int, help="base seed override")
    p.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--rule", help="stopping rule override")
    p.add_argument("--eps", type=float, help="absolute tolerance override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadow-qfi",
        description="Krylov-shadow QFI estimation with reliability-aware stopping",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="run one adaptive trajectory")
    _common_flags(p_est)
    p_est.add_argument("--n", type=int, help="qubit count")
    p_est.add_argument("--p-phi", type=float, help="dephasing probability")
    p_est.add_argument("--p-dep", type=float, help="depolarizing probability")

    p_grid = sub.add_parser("grid", help="reliability grid -> runs.csv + summary.csv")
    _common_flags(p_grid)
    p_grid.add_argument(
        "--trajectories", action="store_true", help="also write trajectories.csv"
    )

    p_abl = sub.add_parser("ablation", help="gate-threshold sweep -> ablation.csv")
    _common_flags(p_abl)
    p_abl.add_argument("--p-phi", type=float, default=0.12)

    p_cal = sub.add_parser("calibrate", help="population table -> calibration.csv")
    _common_flags(p_cal)
    p_cal.add_argument("--k-max", type=int, default=16)

    p_dec = sub.add_parser("decay-fit", help="exponential decay fits -> decay CSVs")
    _common_flags(p_dec)
    p_dec.add_argument("--k-max", type=int, default=8)

    p_rep = sub.add_parser("report", help="recompute the summary from runs.csv")
    p_rep.add_argument("runs_csv", help="path to runs.csv")
    p_rep.add_argument("--out", help="write summary.csv here instead of stdout")

    return parser


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def _spec_from_config(cfg: dict, args) -> harness.GridSpec:
    grid = dict(cfg.get("grid", {}))
    if args.seed is not None:
        grid["base_seed"] = args.seed
    if args.eps is not None:
        grid["epsilon"] = args.eps
        grid.pop("epsilon_rel", None)
    if getattr(args, "rule", None):
        grid["rules"] = [args.rule]
    known = {
        "n_qubits", "p_phi_list", "p_dep", "alpha", "replicates", "rules",
        "epsilon", "epsilon_rel", "base_seed", "schedule_fixed_k",
        "schedule_m_levels",
    }
    unknown = set(grid) - known
    if unknown:
        raise ConfigError(f"unknown grid config keys: {sorted(unknown)}")
    if "epsilon" not in grid and "epsilon_rel" not in grid:
        grid["epsilon"] = 0.2
    return harness.GridSpec(**grid)


def _stop_from_config(cfg: dict, epsilon: float, rule: str) -> stopping.StopConfig:
    stop = dict(cfg.get("stop", {}))
    stop.pop("epsilon", None)
    stop.pop("rule", None)
    return stopping.StopConfig(epsilon=epsilon, rule=rule, **stop)


def _boot_from_config(cfg: dict) -> BootstrapConfig:
    boot = dict(cfg.get("bootstrap", {}))
    return BootstrapConfig(**boot)


def _metadata(cfg: dict, spec: harness.GridSpec) -> dict:
    return {
        "config_hash": harness.config_hash(cfg),
        "base_seed": spec.base_seed,
        "version": __version__,
    }


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    n = args.n if args.n is not None else cfg.get("grid", {}).get("n_qubits", 4)
    p_phi = args.p_phi if args.p_phi is not None else 0.12
    p_dep = args.p_dep if args.p_dep is not None else cfg.get("grid", {}).get("p_dep", 0.03)
    rule = args.rule or "component_aware"
    epsilon = args.eps if args.eps is not None else 0.2
    base_seed = args.seed if args.seed is not None else 0

    inst = build_instance(NoiseConfig(n, p_phi, p_dep))
    stop_cfg = _stop_from_config(cfg, epsilon, rule)
    boot_cfg = replace(_boot_from_config(cfg), seed=base_seed ^ harness.BOOTSTRAP_SEED_XOR)
    calib = None
    if rule == "heldout_component_aware":
        rows = harness.make_calibration_rows(
            replace(_spec_from_config(cfg, args), n_qubits=n, p_phi_list=[p_phi], p_dep=p_dep),
            stop_cfg.k_max,
        )
        calib = harness.calibration_table_from_rows(rows)
    res = run(inst, stop_cfg, boot_cfg, base_seed, calib=calib)
    d = res.decision
    err = abs(d.f_hat - inst.f_ref)
    print(
        f"outcome={d.outcome} k={d.k_final} m={d.m_final} "
        f"f_hat={d.f_hat:.6f} width={d.width:.6f} d_k={harness._format_value(d.d_k)} "
        f"f_ref={inst.f_ref:.6f} abs_err={err:.6f} n_eval={res.n_eval} seed={res.seed}"
    )
    if args.out:
        out = _outdir(args)
        traj_rows = [
            dict(zip(harness.TRAJECTORY_COLUMNS,
                     (f"{rule}-p{p_phi:g}-r000", rule, s.iteration, s.k, s.m,
                      s.bundle.f_hat, s.bundle.width, s.bundle.d_k, s.action,
                      inst.f_ref, epsilon)))
            for s in res.steps
        ]
        harness.write_csv(
            os.path.join(out, "trajectory.csv"),
            harness.TRAJECTORY_COLUMNS,
            traj_rows,
            {"config_hash": harness.config_hash(cfg), "base_seed": base_seed,
             "version": __version__},
        )
    return 0


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    spec = _spec_from_config(cfg, args)
    stop_cfg = _stop_from_config(cfg, epsilon=1.0, rule=spec.rules[0])
    boot_cfg = _boot_from_config(cfg)
    calib = None
    if any(r == "heldout_component_aware" for r in spec.rules):
        rows = harness.make_calibration_rows(spec, stop_cfg.k_max)
        calib = harness.calibration_table_from_rows(rows)
    records, summaries, trajectories = harness.run_grid(
        spec, stop_cfg, boot_cfg, jobs=args.jobs, calib=calib
    )
    out = _outdir(args)
    meta = _metadata(cfg, spec)
    harness.write_runs_csv(os.path.join(out, "runs.csv"), records, meta)
    harness.write_summary_csv(os.path.join(out, "summary.csv"), summaries, meta)
    if args.trajectories:
        harness.write_csv(
            os.path.join(out, "trajectories.csv"),
            harness.TRAJECTORY_COLUMNS,
            [dict(zip(harness.TRAJECTORY_COLUMNS, row)) for row in trajectories],
            meta,
        )
    for s in summaries:
        sp = "n/a" if s.sp is None else f"{s.sp:.2f}"
        print(
            f"{s.rule:>24s} p_phi={s.p_phi:<5g} FSR={s.fsr:.2f} "
            f"[{s.fsr_lo:.2f},{s.fsr_hi:.2f}] SR={s.sr:.2f} "
            f"[{s.sr_lo:.2f},{s.sr_hi:.2f}] SP={sp} "
            f"med_err={s.median_abs_err:.3f} med_m={s.median_m_final:.0f}"
        )
    return 0


def cmd_ablation(args) -> int:
    cfg = load_config(args.config)
    spec = _spec_from_config(cfg, args)
    stop_cfg = _stop_from_config(cfg, epsilon=1.0, rule="component_aware")
    boot_cfg = _boot_from_config(cfg)
    abl = dict(cfg.get("ablation", {}))
    cells = harness.run_ablation(
        spec,
        stop_cfg,
        boot_cfg,
        k_min_set=abl.get("k_min_set", (2, 4, 6)),
        m_min_set=abl.get("m_min_set", (32, 128, 256)),
        p_set=abl.get("p_set", (1, 2, 3)),
        p_phi=args.p_phi,
        jobs=args.jobs,
    )
    out = _outdir(args)
    columns = ["k_min_stop", "m_min_stop", "patience", "n_runs", "n_success",
               "n_false_stop", "fsr", "sr", "is_default"]
    harness.write_csv(os.path.join(out, "ablation.csv"), columns, cells,
                      _metadata(cfg, spec))
    for c in cells:
        flag = " *default*" if c["is_default"] else ""
        print(
            f"(K_min={c['k_min_stop']}, M_min={c['m_min_stop']}, "
            f"P={c['patience']}): FSR={c['fsr']:.2f} SR={c['sr']:.2f}{flag}"
        )
    return 0


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    spec = _spec_from_config(cfg, args)
    rows = harness.make_calibration_rows(spec, args.k_max)
    out = _outdir(args)
    harness.write_csv(
        os.path.join(out, "calibration.csv"),
        harness.CALIBRATION_COLUMNS,
        rows,
        _metadata(cfg, spec),
    )
    print(f"wrote {len(rows)} calibration rows to {os.path.join(out, 'calibration.csv')}")
    return 0


def cmd_decay_fit(args) -> int:
    cfg = load_config(args.config)
    spec = _spec_from_config(cfg, args)
    series_rows, fit_rows = [], []
    for p_phi in spec.p_phi_list:
        inst = build_instance(
            NoiseConfig(spec.n_qubits, p_phi, spec.p_dep, alpha=spec.alpha)
        )
        rows = harness.decay_series(inst, args.k_max)
        series_rows.extend(rows)
        for series in ("b_abs", "d_k_pop"):
            try:
                fit_rows.append(harness.fit_decay_rows(rows, series))
            except ShadowQfiError:
                pass  # degenerate series (e.g. bias identically zero)
    out = _outdir(args)
    meta = _metadata(cfg, spec)
    harness.write_csv(os.path.join(out, "decay.csv"), harness.DECAY_COLUMNS,
                      series_rows, meta)
    harness.write_csv(os.path.join(out, "decay_fits.csv"),
                      harness.DECAY_FIT_COLUMNS, fit_rows, meta)
    for r in fit_rows:
        print(
            f"n={r['n']} p_phi={r['p_phi']:<5g} {r['series']:<8s} "
            f"mu_hat={r['mu_hat']:.3f} CI=[{r['ci_lo']:.3f},{r['ci_hi']:.3f}]"
        )
    return 0


def cmd_report(args) -> int:
    records, metadata = harness.read_runs_csv(args.runs_csv)
    summaries = harness.summarize(records)
    if args.out:
        out = _outdir(args)
        harness.write_summary_csv(os.path.join(out, "summary.csv"), summaries, metadata)
    for s in summaries:
        sp = "n/a" if s.sp is None else f"{s.sp:.2f}"
        print(
            f"{s.rule:>24s} p_phi={s.p_phi:<5g} FSR={s.fsr:.2f} "
            f"[{s.fsr_lo:.2f},{s.fsr_hi:.2f}] SR={s.sr:.2f} "
            f"[{s.sr_lo:.2f},{s.sr_hi:.2f}] SP={sp} "
            f"med_err={s.median_abs_err:.3f} med_m={s.median_m_final:.0f}"
        )
    return 0


_COMMANDS = {
    "estimate": cmd_estimate,
    "grid": cmd_grid,
    "ablation": cmd_ablation,
    "calibrate": cmd_calibrate,
    "decay-fit": cmd_decay_fit,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ShadowQfiError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
