"""Command-line interface.

    robust-mc run --config spec.json --out results.csv [--json results.json]
    robust-mc solve --matrix m.txt --mask mask.txt --rank 5 --tau 0.5 --eta 0.05
    robust-mc presets
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bench import (
    emit_csv,
    emit_json,
    emit_trajectories_csv,
    fig4_ratios,
    presets,
    run_experiment,
    spec_from_dict,
    spec_to_dict,
)
from .matcore import read_matrix, write_matrix
from .model import ObservationSet
from .solver import GdConfig, gd_run
from .spectral import spectral_initialize


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        spec = spec_from_dict(json.load(fh))
    records = run_experiment(spec)
    emit_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    if spec.record_trajectories:
        traj_path = Path(args.out).with_suffix(".traj.csv")
        emit_trajectories_csv(records, traj_path)
        print(f"wrote trajectories to {traj_path}")
    if args.json:
        emit_json(spec, records, args.json)
        print(f"wrote JSON to {args.json}")
    if spec.preset == "fig4_ls_ratio":
        for row in fig4_ratios(records):
            print(f"{row['distribution']} sigma={row['sigma']:g} "
                  f"trial={row['trial']} ratio={row['ratio']:.4g}")
    return 0


def _parse_tau(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _cmd_solve(args) -> int:
    matrix = read_matrix(args.matrix)
    mask = read_matrix(args.mask)
    if mask.shape != matrix.shape:
        print(f"mask shape {mask.shape} does not match matrix {matrix.shape}",
              file=sys.stderr)
        return 2
    rows, cols = np.nonzero(mask != 0)
    p = args.p if args.p is not None else rows.size / matrix.size
    obs = ObservationSet(n1=matrix.shape[0], n2=matrix.shape[1], rate_p=p,
                         rows=rows.astype(np.int64), cols=cols.astype(np.int64),
                         values=matrix[rows, cols])
    init = spectral_initialize(obs, args.tau, args.rank)
    cfg = GdConfig(eta=args.eta, max_iters=args.max_iters,
                   rel_change_tol=args.tol, record_every=args.record_every,
                   tau=args.tau)
    trace = gd_run(init.factors, obs, cfg)
    for rec in trace.records:
        print(f"iter={rec.iteration:6d} objective={rec.objective:.10e} "
              f"rel_change={rec.rel_change:.4e} imbalance={rec.imbalance:.4e}")
    print(f"stopped after {trace.iters_run} iterations ({trace.stop_reason})")
    if args.out:
        write_matrix(trace.final.product(), args.out)
        print(f"wrote completed matrix to {args.out}")
    return 0


def _cmd_presets(_args) -> int:
    payload = {name: spec_to_dict(spec) for name, spec in presets().items()}
    print(json.dumps(payload, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-mc",
        description="Robust matrix completion: Huber-loss gradient descent "
                    "with truncated spectral initialization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment campaign")
    p_run.add_argument("--config", required=True, help="JSON experiment spec")
    p_run.add_argument("--out", required=True, help="output CSV path")
    p_run.add_argument("--json", default=None, help="optional JSON output path")
    p_run.set_defaults(func=_cmd_run)

    p_solve = sub.add_parser("solve", help="complete one matrix from files")
    p_solve.add_argument("--matrix", required=True,
                         help="observed matrix, dense text format")
    p_solve.add_argument("--mask", required=True,
                         help="0/1 mask of observed entries, same format")
    p_solve.add_argument("--rank", type=int, required=True)
    p_solve.add_argument("--tau", type=_parse_tau, required=True,
                         help="Huber threshold; 'inf' for least squares")
    p_solve.add_argument("--eta", type=float, required=True, help="step size")
    p_solve.add_argument("--p", type=float, default=None,
                         help="nominal sampling rate (default: observed fraction)")
    p_solve.add_argument("--max-iters", type=int, default=2000)
    p_solve.add_argument("--tol", type=float, default=1e-10)
    p_solve.add_argument("--record-every", type=int, default=None)
    p_solve.add_argument("--out", default=None,
                         help="write the completed matrix here")
    p_solve.set_defaults(func=_cmd_solve)

    p_presets = sub.add_parser("presets", help="print the default campaign specs")
    p_presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
