"""Render benchmark figures from harness CSV output.

Rendering is read-only over the CSVs and deterministic: the same input
bytes produce the same plotted data, verified through a hash of the
plotted arrays rather than image pixels.  Colors come from a
colorblind-safe cycle (Okabe-Ito).
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "figurekit"

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "traj")

#: CSV roles each figure reads
FIGURE_INPUTS = {
    "fig1": ("runs",),
    "fig2": ("summary",),
    "fig3": ("summary",),
    "fig4": ("schedule_runs",),
    "fig5": ("ablation",),
    "fig6": ("decay",),
    "traj": ("trajectories",),
}

REQUIRED_COLUMNS = {
    "runs": ("rule", "p_phi", "width", "abs_err", "outcome"),
    "summary": ("rule", "p_phi", "fsr", "fsr_lo", "fsr_hi", "sr", "sr_lo",
                 "sr_hi", "median_abs_err", "median_m_final"),
    "schedule_runs": ("rule", "epsilon", "width", "rel_err", "f_ref", "outcome"),
    "ablation": ("k_min_stop", "m_min_stop", "patience", "fsr", "is_default"),
    "decay": ("n", "p_phi", "K", "b_abs", "d_k_pop"),
    "trajectories": ("run_id", "rule", "iteration", "k", "m", "f_hat",
                      "width", "d_k", "f_ref", "epsilon"),
}

# Okabe-Ito
PALETTE = ("#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00", "#56B4E9")


class FigureError(ValueError):
    """Bad figure specification or malformed input CSV."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    input_csv_paths: dict
    output_path: str
    epsilon: float = 0.2

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise FigureError(
                f"unknown figure id {self.figure_id!r}; expected one of {FIGURE_IDS}"
            )


@dataclass(frozen=True)
class RenderResult:
    output_path: str
    data_hash: str
    guides: tuple = ()


def read_table(path) -> list[dict]:
    """Read a harness CSV, skipping '#' metadata lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise FigureError(f"{path} is empty") from None
    rows = [dict(zip(columns, vals)) for vals in reader]
    if not rows:
        raise FigureError(f"{path} has a header but no data rows")
    return rows


def _require_columns(rows: list[dict], role: str, path) -> None:
    missing = [c for c in REQUIRED_COLUMNS[role] if c not in rows[0]]
    if missing:
        raise FigureError(f"{path} is missing required columns: {missing}")


def _fnum(value: str) -> float:
    if value == "":
        return math.nan
    if value == "inf":
        return math.inf
    return float(value)


def _load(spec: FigureSpec) -> dict:
    tables = {}
    for role in FIGURE_INPUTS[spec.figure_id]:
        if role not in spec.input_csv_paths:
            raise FigureError(
                f"{spec.figure_id} needs an input CSV for role {role!r}"
            )
        path = spec.input_csv_paths[role]
        rows = read_table(path)
        _require_columns(rows, role, path)
        tables[role] = rows
    return tables


class _Hasher:
    """Accumulates plotted arrays into a stable digest."""

    def __init__(self):
        self._h = hashlib.sha256()

    def add(self, label: str, *arrays) -> None:
        self._h.update(label.encode())
        for a in arrays:
            arr = np.asarray(a, dtype=float)
            self._h.update(arr.shape.__repr__().encode())
            self._h.update(arr.tobytes())

    def digest(self) -> str:
        return self._h.hexdigest()


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure; returns the output path and plotted-data hash.

    Raises FigureError (and writes nothing) on empty or malformed input.
    """
    tables = _load(spec)
    hasher = _Hasher()
    fig, guides = _RENDERERS[spec.figure_id](tables, spec, hasher)
    os.makedirs(os.path.dirname(os.path.abspath(spec.output_path)), exist_ok=True)
    fig.savefig(spec.output_path, metadata=_metadata_for(spec.output_path))
    plt.close(fig)
    return RenderResult(spec.output_path, hasher.digest(), tuple(guides))


def _metadata_for(path):
    # strip volatile creation dates so identical inputs give identical files
    if str(path).endswith(".svg"):
        return {"Date": None}
    return None


def _rules_in(rows):
    seen = []
    for r in rows:
        if r["rule"] not in seen:
            seen.append(r["rule"])
    return seen


def _fig1(tables, spec, hasher):
    rows = tables["runs"]
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, rule in enumerate(_rules_in(rows)):
        sub = [r for r in rows if r["rule"] == rule]
        w = [_fnum(r["width"]) for r in sub]
        e = [_fnum(r["abs_err"]) for r in sub]
        success = [r["outcome"] == "success" for r in sub]
        hasher.add(f"fig1:{rule}", w, e, success)
        ax.scatter(
            w, e, s=18, alpha=0.65, label=rule, color=PALETTE[i % len(PALETTE)],
            marker="o" if i == 0 else "^",
        )
    eps = spec.epsilon
    ax.axvline(eps, linestyle="--", color="gray", linewidth=1.0)
    ax.axhline(eps, linestyle="--", color="gray", linewidth=1.0)
    guides = (("width", eps), ("abs_err", eps))
    hasher.add("fig1:guides", [eps, eps])
    ax.set_xlabel("terminal interval width")
    ax.set_ylabel("post hoc absolute error")
    ax.set_title("Interval width vs. terminal error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, guides


def _fig2(tables, spec, hasher):
    rows = tables["summary"]
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, rule in enumerate(_rules_in(rows)):
        sub = sorted(
            (r for r in rows if r["rule"] == rule), key=lambda r: _fnum(r["p_phi"])
        )
        p = [_fnum(r["p_phi"]) for r in sub]
        fsr = [_fnum(r["fsr"]) for r in sub]
        fsr_err = [
            [_fnum(r["fsr"]) - _fnum(r["fsr_lo"]) for r in sub],
            [_fnum(r["fsr_hi"]) - _fnum(r["fsr"]) for r in sub],
        ]
        sr = [_fnum(r["sr"]) for r in sub]
        sr_err = [
            [_fnum(r["sr"]) - _fnum(r["sr_lo"]) for r in sub],
            [_fnum(r["sr_hi"]) - _fnum(r["sr"]) for r in sub],
        ]
        hasher.add(f"fig2:{rule}", p, fsr, fsr_err, sr, sr_err)
        color = PALETTE[i % len(PALETTE)]
        ax.errorbar(p, fsr, yerr=fsr_err, marker="o", color=color,
                    label=f"{rule} FSR", capsize=2)
        ax.errorbar(p, sr, yerr=sr_err, marker="o", markerfacecolor="none",
                    linestyle=":", color=color, label=f"{rule} SR", capsize=2)
    ax.set_xlabel("dephasing probability")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("False-stop and stop rates vs. noise")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig, ()


def _fig3(tables, spec, hasher):
    rows = tables["summary"]
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for i, rule in enumerate(_rules_in(rows)):
        sub = sorted(
            (r for r in rows if r["rule"] == rule), key=lambda r: _fnum(r["p_phi"])
        )
        p = [_fnum(r["p_phi"]) for r in sub]
        med = [_fnum(r["median_abs_err"]) for r in sub]
        hasher.add(f"fig3:{rule}", p, med)
        ax.plot(p, med, marker="o", color=PALETTE[i % len(PALETTE)], label=rule)
    ax.set_xlabel("dephasing probability")
    ax.set_ylabel("median post hoc absolute error")
    ax.set_title("Terminal error vs. noise")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, ()


def _fig4(tables, spec, hasher):
    rows = tables["schedule_runs"]
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    eps = _fnum(rows[0]["epsilon"])
    rel_eps = eps / _fnum(rows[0]["f_ref"])
    for i, rule in enumerate(_rules_in(rows)):
        sub = [r for r in rows if r["rule"] == rule]
        w = [_fnum(r["width"]) / eps for r in sub]
        e = [_fnum(r["rel_err"]) / rel_eps for r in sub]
        success = [r["outcome"] == "success" for r in sub]
        hasher.add(f"fig4:{rule}", w, e, success)
        face = [PALETTE[i % len(PALETTE)] if s else "none" for s in success]
        ax.scatter(w, e, s=30, facecolors=face,
                   edgecolors=PALETTE[i % len(PALETTE)], label=rule)
    ax.axvline(1.0, linestyle="--", color="gray", linewidth=1.0)
    ax.axhline(1.0, linestyle="--", color="gray", linewidth=1.0)
    hasher.add("fig4:guides", [1.0, 1.0])
    ax.set_xlabel("terminal width / tolerance")
    ax.set_ylabel("true error / tolerance")
    ax.set_title("Recalibrated-control decision geometry")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, (("width_over_eps", 1.0), ("err_over_eps", 1.0))


def _fig5(tables, spec, hasher):
    rows = tables["ablation"]
    k_set = sorted({int(r["k_min_stop"]) for r in rows})
    m_set = sorted({int(r["m_min_stop"]) for r in rows})
    p_set = sorted({int(r["patience"]) for r in rows})
    fig, axes = plt.subplots(1, len(p_set), figsize=(3.1 * len(p_set), 3.4),
                             squeeze=False)
    default_cell = None
    grids = []
    for ax, pat in zip(axes[0], p_set):
        grid = np.full((len(m_set), len(k_set)), np.nan)
        for r in rows:
            if int(r["patience"]) != pat:
                continue
            i = m_set.index(int(r["m_min_stop"]))
            j = k_set.index(int(r["k_min_stop"]))
            grid[i, j] = _fnum(r["fsr"])
            if r["is_default"] == "true":
                default_cell = (ax, i, j)
        grids.append(grid)
        im = ax.imshow(grid, vmin=0, vmax=max(0.5, np.nanmax(grid)),
                       cmap="YlOrRd", origin="lower")
        for i in range(len(m_set)):
            for j in range(len(k_set)):
                if not math.isnan(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                            fontsize=8)
        ax.set_xticks(range(len(k_set)), [str(k) for k in k_set])
        ax.set_yticks(range(len(m_set)), [str(m) for m in m_set])
        ax.set_xlabel("minimum order gate")
        ax.set_title(f"patience = {pat}", fontsize=9)
    axes[0][0].set_ylabel("minimum sample gate")
    if default_cell is not None:
        ax, i, j = default_cell
        ax.add_patch(plt.Rectangle((j - 0.5, i - 0.5), 1, 1, fill=False,
                                   edgecolor="#0072B2", linewidth=2.5))
    hasher.add("fig5", np.array(grids))
    fig.colorbar(im, ax=axes[0][-1], label="false-stop rate", shrink=0.85)
    fig.suptitle("Gate-threshold ablation")
    fig.tight_layout()
    return fig, ()


def _fig6(tables, spec, hasher):
    rows = tables["decay"]
    sizes = sorted({int(r["n"]) for r in rows})
    fig, axes = plt.subplots(1, len(sizes), figsize=(3.4 * len(sizes), 3.4),
                             squeeze=False)
    for ax, n in zip(axes[0], sizes):
        sub = sorted((r for r in rows if int(r["n"]) == n), key=lambda r: int(r["K"]))
        k = np.array([int(r["K"]) for r in sub])
        b = np.array([_fnum(r["b_abs"]) for r in sub])
        d = np.array([_fnum(r["d_k_pop"]) for r in sub])
        hasher.add(f"fig6:{n}", k, b, d)
        mask_b = (k >= 2) & (b > 0)
        ax.semilogy(k[mask_b], b[mask_b], "o", color=PALETTE[0], label="|bias|")
        mask_d = ~np.isnan(d) & (d > 0)
        ax.semilogy(k[mask_d], d[mask_d], "^", color=PALETTE[1],
                    label="inter-order change")
        if mask_b.sum() >= 3:
            coef = np.polyfit(k[mask_b], np.log(b[mask_b]), 1)
            kk = np.linspace(k[mask_b].min(), k[mask_b].max(), 50)
            ax.semilogy(kk, np.exp(coef[1] + coef[0] * kk), "--",
                        color=PALETTE[0], linewidth=1.0,
                        label=f"fit rate {math.exp(coef[0]):.2f}")
        ax.set_xlabel("Krylov order")
        ax.set_title(f"n = {n}", fontsize=9)
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("magnitude")
    fig.suptitle("Truncation-bias decay")
    fig.tight_layout()
    return fig, ()


def _traj(tables, spec, hasher):
    rows = tables["trajectories"]
    run_ids = []
    for r in rows:
        if r["run_id"] not in run_ids:
            run_ids.append(r["run_id"])
    fig, axes = plt.subplots(3, 1, figsize=(5.4, 6.4), sharex=True)
    f_ref = _fnum(rows[0]["f_ref"])
    eps = _fnum(rows[0]["epsilon"])
    for i, rid in enumerate(run_ids[:4]):
        sub = sorted(
            (r for r in rows if r["run_id"] == rid), key=lambda r: int(r["iteration"])
        )
        it = [int(r["iteration"]) for r in sub]
        f = [_fnum(r["f_hat"]) for r in sub]
        k = [int(r["k"]) for r in sub]
        m = [int(r["m"]) for r in sub]
        hasher.add(f"traj:{rid}", it, f, k, m)
        color = PALETTE[i % len(PALETTE)]
        axes[0].plot(it, f, marker="o", color=color, label=rid)
        axes[1].step(it, k, where="post", marker=".", color=color)
        axes[2].step(it, m, where="post", marker=".", color=color)
    axes[0].axhspan(f_ref - eps, f_ref + eps, color="gray", alpha=0.25)
    hasher.add("traj:band", [f_ref - eps, f_ref + eps])
    axes[0].set_ylabel("estimate")
    axes[0].legend(fontsize=6)
    axes[1].set_ylabel("Krylov order")
    axes[2].set_ylabel("sample count")
    axes[2].set_yscale("log", base=2)
    axes[2].set_xlabel("iteration")
    fig.suptitle("Adaptive trajectories")
    fig.tight_layout()
    return fig, ()


_RENDERERS = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "traj": _traj,
}
