"""Batch figure CLI: figures --which all|fig1|...|traj --in DIR --out DIR."""

from __future__ import annotations

import argparse
import os
import sys

from .figures import FIGURE_IDS, FIGURE_INPUTS, FigureError, FigureSpec, render

#: default file names each role resolves to inside --in
ROLE_FILES = {
    "runs": "runs.csv",
    "summary": "summary.csv",
    "schedule_runs": "schedule_runs.csv",
    "ablation": "ablation.csv",
    "decay": "decay.csv",
    "trajectories": "trajectories.csv",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures", description="render benchmark figures from harness CSVs"
    )
    parser.add_argument(
        "--which",
        default="all",
        choices=("all",) + FIGURE_IDS,
        help="figure to render (default: all)",
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="CSV directory")
    parser.add_argument("--out", dest="out_dir", required=True, help="output directory")
    parser.add_argument("--eps", type=float, default=0.2, help="tolerance guides")
    parser.add_argument(
        "--format", default="svg", choices=("svg", "png"), help="output format"
    )
    return parser


def spec_for(figure_id: str, in_dir: str, out_dir: str, eps: float, fmt: str) -> FigureSpec:
    paths = {
        role: os.path.join(in_dir, ROLE_FILES[role])
        for role in FIGURE_INPUTS[figure_id]
    }
    return FigureSpec(
        figure_id=figure_id,
        input_csv_paths=paths,
        output_path=os.path.join(out_dir, f"{figure_id}.{fmt}"),
        epsilon=eps,
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    wanted = FIGURE_IDS if args.which == "all" else (args.which,)
    failures = 0
    for figure_id in wanted:
        spec = spec_for(figure_id, args.in_dir, args.out_dir, args.eps, args.format)
        missing = [p for p in spec.input_csv_paths.values() if not os.path.exists(p)]
        if missing:
            if args.which == "all":
                print(f"skip {figure_id}: missing {missing}", file=sys.stderr)
                continue
            print(f"error: {figure_id} inputs missing: {missing}", file=sys.stderr)
            return 1
        try:
            result = render(spec)
        except FigureError as exc:
            print(f"error rendering {figure_id}: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(f"{figure_id}: {result.output_path} data_hash={result.data_hash[:16]}")
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
