"""Batch command-line interface: campaign runs, oracle validation, power opt."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import Campaign, build_geometry_artifacts, run_campaign, uplink_block_estimates
from .report import Method
from .scenario import load_scenario, with_overrides
from .uplink import (batched_exact_sinr_fn, full_power, maxmin_power,
                     uplink_sinr_approx1, uplink_sinr_approx2)
from .validation import run_oracle_suite, write_oracle_csv


def _parse_modes(text: str) -> tuple:
    try:
        return tuple(Method(tok.strip()) for tok in text.split(",") if tok.strip())
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise SystemExit(f"error: unknown mode in {text!r}; valid modes: {valid}")


def _load(args):
    config = load_scenario(args.config)
    if args.seed is not None:
        config = with_overrides(config, master_seed=args.seed)
    return config


def _cmd_run(args) -> int:
    config = _load(args)
    campaign = Campaign(config=config, modes=_parse_modes(args.modes),
                        geometry_draws=args.geometries,
                        blocks_per_geometry=args.trials,
                        power_opt=args.power_opt)
    result = run_campaign(campaign, out_dir=args.out)
    for mode, summary in sorted(result.summaries.items()):
        print(f"{mode}: mean_se={summary.mean_se:.4f} "
              f"outage95_se={summary.outage95_se:.4f} n={summary.n_samples}")
    if args.out:
        print(f"wrote {Path(args.out) / 'samples.csv'} and summary.json")
    return 0


def _cmd_validate(args) -> int:
    reports = run_oracle_suite(seed=args.seed if args.seed is not None else 0,
                               trials=args.trials)
    failed = 0
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name} ({r.fingerprint}): artifact={r.artifact_value:.3e} "
              f"oracle={r.oracle_value:.3e} tol={r.tolerance:.3e}")
        failed += not r.passed
    if args.out:
        write_oracle_csv(args.out, reports)
        print(f"appended {len(reports)} rows to {args.out}")
    return 1 if failed else 0


def _cmd_power_opt(args) -> int:
    config = _load(args)
    artifacts = build_geometry_artifacts(config, geometry_index=0)
    if args.utility == "approx1":
        sinr_fn = lambda p: uplink_sinr_approx1(artifacts.stats, p)
    elif args.utility == "exact":
        hhat = uplink_block_estimates(artifacts, config, num_blocks=args.trials)
        sinr_fn = batched_exact_sinr_fn(hhat, artifacts.stats)
    else:
        sinr_fn = lambda p: uplink_sinr_approx2(artifacts.stats, p)
    before = np.asarray(sinr_fn(full_power(config).p), dtype=float)
    result = maxmin_power(sinr_fn, full_power(config))
    print(f"utility={args.utility} iterations={result.iterations} "
          f"converged={result.converged}")
    print(f"min SINR full power: {before.min():.6g}   "
          f"optimized: {result.sinr.min():.6g}")
    for k, (p, s) in enumerate(zip(result.powers.p, result.sinr)):
        print(f"user {k}: power={p:.4f} mW sinr={s:.6g}")
    if args.out:
        doc = {"utility": args.utility, "iterations": result.iterations,
               "converged": result.converged,
               "min_sinr_full_power": float(before.min()),
               "min_sinr_optimized": float(result.sinr.min()),
               "powers_mw": result.powers.p.tolist(),
               "sinr": result.sinr.tolist()}
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfmimo",
        description="Cell-free massive MIMO hybrid-beamforming batch simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign from a config file")
    run.add_argument("--config", required=True, help="scenario config file path")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--out", default=None, help="output directory for CSV/summary")
    run.add_argument("--modes", default="exact_mc,approx2",
                     help="comma-separated SINR methods")
    run.add_argument("--geometries", type=int, default=10,
                     help="number of geometry draws")
    run.add_argument("--trials", type=int, default=100,
                     help="blocks (MC trials) per geometry")
    run.add_argument("--power-opt", action="store_true",
                     help="optimize UL powers per geometry before evaluating")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="run the independent oracle battery")
    val.add_argument("--trials", type=int, default=10000, help="MC draws per check")
    val.add_argument("--seed", type=int, default=None)
    val.add_argument("--out", default=None, help="CSV file to append reports to")
    val.set_defaults(func=_cmd_validate)

    popt = sub.add_parser("power-opt", help="max-min uplink power optimization")
    popt.add_argument("--config", required=True)
    popt.add_argument("--seed", type=int, default=None)
    popt.add_argument("--trials", type=int, default=200,
                      help="frozen realization batch for the exact utility")
    popt.add_argument("--utility", choices=("approx2", "approx1", "exact"),
                      default="approx2")
    popt.add_argument("--out", default=None, help="JSON result path")
    popt.set_defaults(func=_cmd_power_opt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - diagnostics with nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
