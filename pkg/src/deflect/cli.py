"""Command-line experiment runner.

    deflect --scenario udg_density_sweep --nodes 500 --replications 5 \
            --flows 200 --out results.csv

Emits the aggregated metrics CSV to --out (stdout by default). Routing
drops are results, not failures: the exit status is nonzero only for
configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .experiments import (
    DEFAULT_DENSITIES,
    SCENARIOS,
    ScenarioConfig,
    run_scenario,
    write_csv,
)
from .routing import POLICIES

log = logging.getLogger(__name__)


def _comma_floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from exc


def _comma_policies(text: str) -> List[str]:
    values = [x.strip() for x in text.split(",") if x.strip()]
    for v in values:
        if v not in POLICIES:
            raise argparse.ArgumentTypeError(
                f"unknown policy {v!r} (choose from {', '.join(POLICIES)})"
            )
    return values


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="deflect",
        description="Geographic routing experiments with void deflection.",
    )
    ap.add_argument("--scenario", choices=SCENARIOS, required=True)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument(
        "--density",
        type=_comma_floats,
        default=list(DEFAULT_DENSITIES),
        help="comma-separated density grid (mean neighbors per node)",
    )
    ap.add_argument("--k", type=int, default=3, help="hello propagation scope in hops")
    ap.add_argument(
        "--policy",
        type=_comma_policies,
        default=list(POLICIES),
        help="comma-separated policy list",
    )
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--flows", type=int, default=1000)
    ap.add_argument("--packets-per-flow", type=int, default=10)
    ap.add_argument(
        "--delta-d",
        type=float,
        default=None,
        help="sector merge distance tolerance (default: half the radio range)",
    )
    ap.add_argument("--guard-angle", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="CSV output path (default stdout)")
    ap.add_argument(
        "--dump-topologies",
        default=None,
        metavar="DIR",
        help="write every generated topology to DIR in the text format",
    )
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ScenarioConfig(
            scenario=args.scenario,
            n_nodes=args.nodes,
            densities=tuple(args.density),
            k=args.k,
            policies=tuple(args.policy),
            n_topologies=args.replications,
            n_flows=args.flows,
            packets_per_flow=args.packets_per_flow,
            delta_d=args.delta_d,
            guard_angle=args.guard_angle,
            seed=args.seed,
            dump_dir=args.dump_topologies,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    result = run_scenario(cfg)
    for density, k in result.failed_points:
        print(
            f"warning: no topology generated at density={density:g} k={k}",
            file=sys.stderr,
        )
    try:
        if args.out:
            with open(args.out, "w") as fh:
                write_csv(result.records, fh)
        else:
            write_csv(result.records, sys.stdout)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
