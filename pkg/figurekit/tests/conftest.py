import csv
import math

import pytest


def _write(path, columns, rows, meta=("# config_hash=test", "# version=0.1.0")):
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


@pytest.fixture(scope="session")
def csv_dir(tmp_path_factory):
    """A self-consistent miniature set of harness CSVs."""
    root = tmp_path_factory.mktemp("csvs")

    runs_cols = [
        "run_id", "rule", "n", "p_phi", "p_dep", "epsilon", "k_final",
        "m_final", "f_hat", "f_ref", "abs_err", "rel_err", "width", "d_k",
        "outcome", "false_stop", "n_eval", "seed", "r_trunc", "r_stat",
        "delta_j", "attempt_index", "j_max", "conf_estimate", "conf_m",
        "degenerate_bootstrap_count",
    ]
    runs = []
    for i, (rule, w, e, outcome) in enumerate(
        [
            ("width_only", 0.15, 2.3, "success"),
            ("width_only", 0.18, 1.9, "success"),
            ("width_only", 0.9, 0.4, "resource_limit"),
            ("component_aware", 0.85, 0.35, "resource_limit"),
            ("component_aware", 0.95, 0.41, "resource_limit"),
        ]
    ):
        runs.append(
            [f"{rule}-p0.12-r{i:03d}", rule, 4, 0.12, 0.03, 0.2, 2, 32, 0.03,
             2.3525, e, e / 2.3525, w, 0.05, outcome,
             "true" if outcome == "success" and e > 0.2 else "false",
             5, 1000 + i, "", "", "", "", "", "", "", 0]
        )
    _write(root / "runs.csv", runs_cols, runs)

    summary_cols = [
        "rule", "p_phi", "n_runs", "n_success", "n_false_stop", "fsr",
        "fsr_lo", "fsr_hi", "sr", "sr_lo", "sr_hi", "sp", "median_abs_err",
        "median_m_final", "m_final_q25", "m_final_q75",
    ]
    summary = []
    for rule, base in (("width_only", 0.3), ("component_aware", 0.0)):
        for p in (0.0, 0.06, 0.12, 0.18, 0.24):
            fsr = min(1.0, base + p) if rule == "width_only" else 0.0
            summary.append(
                [rule, p, 50, int(50 * fsr), int(50 * fsr), fsr,
                 max(0.0, fsr - 0.1), min(1.0, fsr + 0.1), fsr,
                 max(0.0, fsr - 0.1), min(1.0, fsr + 0.1),
                 "" if fsr == 0 else 0.0, 1.0 - fsr, 512, 32, 512]
            )
    _write(root / "summary.csv", summary_cols, summary)

    sched = []
    for i, (rule, w, rel, outcome) in enumerate(
        [
            ("sample_schedule", 0.17, 0.012, "success"),
            ("sample_schedule", 0.21, 0.02, "resource_limit"),
            ("width_only", 0.12, 0.08, "success"),
        ]
    ):
        sched.append(
            [f"{rule}-p0.03-r{i:03d}", rule, 4, 0.03, 0.03, 0.1885, 16,
             262144, 3.75, 3.7696, rel * 3.7696, rel, w, 0.01, outcome,
             "false", 4, 2000 + i, "", "", "", "", "", "", "", 0]
        )
    _write(root / "schedule_runs.csv", runs_cols, sched)

    abl_cols = ["k_min_stop", "m_min_stop", "patience", "n_runs", "n_success",
                "n_false_stop", "fsr", "sr", "is_default"]
    abl = []
    for k in (2, 4, 6):
        for m in (32, 128, 256):
            for p in (1, 2, 3):
                fsr = 0.4 if (k, m, p) == (2, 32, 1) else 0.0
                abl.append([k, m, p, 50, int(50 * fsr), int(50 * fsr), fsr,
                            fsr, "true" if (k, m, p) == (4, 128, 2) else "false"])
    _write(root / "ablation.csv", abl_cols, abl)

    decay_cols = ["n", "p_phi", "p_dep", "K", "f_k", "b_abs", "d_k_pop"]
    decay = []
    for n in (4, 6):
        for k in range(1, 9):
            b = 2.0 * (0.9 if n == 4 else 0.98) ** k
            decay.append(
                [n, 0.12, 0.03, k, 2.35 - b, b, "" if k == 1 else b * 0.5]
            )
    _write(root / "decay.csv", decay_cols, decay)

    traj_cols = ["run_id", "rule", "iteration", "k", "m", "f_hat", "width",
                 "d_k", "action", "f_ref", "epsilon"]
    traj = []
    for rid, rule in (("width_only-p0.12-r000", "width_only"),
                      ("component_aware-p0.12-r000", "component_aware")):
        k, m = 1, 16
        for it in range(1, 6):
            traj.append([rid, rule, it, k, m, 0.1 * it, 0.5 / it,
                         "inf" if k == 1 else 0.2 / it, "inc_k", 2.3525, 0.2])
            if it % 2:
                k += 1
            else:
                m *= 2
    _write(root / "trajectories.csv", traj_cols, traj)

    return root
