#!/usr/bin/env python3
"""Time the compiled kernels against the pure-Python fallback.

Runs the same simulation workload through both backends, verifies the
outcome logs match, and reports wall-clock times per policy.

    python3 benchmarks/compare_backends.py [--nodes N] [--flows F]
"""

import argparse
import time

import deflect.simulator as simulator
from deflect._pure import RunCore as PureCore
from deflect.geometry import Point
from deflect.routing import RoutingConfig
from deflect.simulator import outcome_log_lines, run_simulation
from deflect.topology import VoidRegion, generate_udg, radius_for_density

try:
    from deflect._speedups import RunCore as CompiledCore
except ImportError:
    CompiledCore = None


def time_backend(core_cls, topology, cfg, flows, packets, seed):
    simulator.RunCore = core_cls
    t0 = time.perf_counter()
    run = run_simulation(topology, cfg, flows, packets, seed=seed, engine="fast")
    elapsed = time.perf_counter() - t0
    return elapsed, outcome_log_lines(run)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--density", type=float, default=8.0)
    ap.add_argument("--flows", type=int, default=300)
    ap.add_argument("--packets", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    if CompiledCore is None:
        raise SystemExit("compiled kernels are not built; run pip install -e .")

    r = radius_for_density(args.nodes, args.density)
    topology = generate_udg(
        args.nodes,
        r,
        void=VoidRegion(Point(0.0, 0.0), 0.3, 0.3),
        seed=args.seed,
        connectivity="component",
    )
    print(
        f"topology: n={topology.n} mean_degree={topology.mean_degree():.1f} "
        f"workload: {args.flows} flows x {args.packets} packets"
    )
    print(f"{'policy':<22} {'pure':>10} {'compiled':>10} {'speedup':>9}")
    original = simulator.RunCore
    try:
        for policy in ("greedy", "deflection", "deflection_optimized"):
            cfg = RoutingConfig(policy=policy)
            t_pure, log_pure = time_backend(
                PureCore, topology, cfg, args.flows, args.packets, args.seed
            )
            t_comp, log_comp = time_backend(
                CompiledCore, topology, cfg, args.flows, args.packets, args.seed
            )
            tag = "" if log_pure == log_comp else "  LOGS DIFFER!"
            print(
                f"{policy:<22} {t_pure:>9.3f}s {t_comp:>9.3f}s "
                f"{t_pure / t_comp:>8.1f}x{tag}"
            )
    finally:
        simulator.RunCore = original


if __name__ == "__main__":
    main()
