"""Scenario runner: parameter sweeps with paired policies and CSV output.

Each parameter point runs n_topologies replications; within one
replication every policy consumes the identical topology and flow list,
so policy differences are paired, not confounded by instance noise.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .geometry import Point
from .routing import POLICIES, RoutingConfig
from .simulator import collect_metrics, run_simulation
from .topology import (
    GenerationError,
    ParameterError,
    VoidRegion,
    generate_proxigraph,
    generate_udg,
    radius_for_density,
    to_text,
)

log = logging.getLogger(__name__)

SCENARIOS = ("udg_density_sweep", "proxigraph_void", "k_sweep")

DEFAULT_DENSITIES = (4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0)
K_SWEEP_VALUES = (1, 2, 3, 4, 5)
K_SWEEP_DENSITY = 8.0

# central square void, side two fifths of the disk radius
VOID_FRACTION = 0.4

METRIC_NAMES = ("loss", "route_hops", "stretch", "transmissions")

CSV_COLUMNS = ("scenario", "policy", "density", "k", "metric", "mean", "ci95", "n")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one experiment invocation.

    densities drives udg_density_sweep and proxigraph_void; k_sweep pins
    density to its single entry (or 8 when a grid is given) and sweeps
    k_values instead.
    """

    scenario: str
    n_nodes: int = 1000
    densities: Tuple[float, ...] = DEFAULT_DENSITIES
    k: int = 3
    k_values: Tuple[int, ...] = K_SWEEP_VALUES
    policies: Tuple[str, ...] = POLICIES
    n_topologies: int = 20
    n_flows: int = 1000
    packets_per_flow: int = 10
    delta_d: Optional[float] = None
    guard_angle: float = 0.0
    seed: int = 0
    check_invariants: bool = False
    dump_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}")
        if min(self.n_nodes, self.n_topologies, self.n_flows, self.packets_per_flow) < 1:
            raise ValueError("all counts must be positive")
        if any(d <= 0 for d in self.densities):
            raise ValueError("densities must be positive")


@dataclass(frozen=True)
class MetricsRecord:
    scenario: str
    policy: str
    density: float
    k: int
    metric: str
    mean: Optional[float]
    ci95: Optional[float]
    n: int


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    records: List[MetricsRecord]
    failed_points: List[Tuple[float, int]] = field(default_factory=list)
    cap_aborts: int = 0
    duplicate_forwards: int = 0


def aggregate(samples: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """Arithmetic mean and 95% Student-t half-width; CI absent below n=2."""
    n = len(samples)
    if n == 0:
        return None, None
    mean = float(np.mean(samples))
    if n == 1:
        return mean, None
    sd = float(np.std(samples, ddof=1))
    half = float(stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))
    return mean, half


def _parameter_points(cfg: ScenarioConfig) -> List[Tuple[float, int]]:
    if cfg.scenario == "k_sweep":
        density = cfg.densities[0] if len(cfg.densities) == 1 else K_SWEEP_DENSITY
        return [(density, k) for k in cfg.k_values]
    return [(d, cfg.k) for d in cfg.densities]


def _make_topology(cfg: ScenarioConfig, density: float, seed: int):
    if cfg.scenario == "proxigraph_void":
        mean_range = radius_for_density(cfg.n_nodes, density, model="proxigraph")
        half = VOID_FRACTION / 2.0
        return generate_proxigraph(
            cfg.n_nodes,
            mean_range,
            void=VoidRegion(Point(0.0, 0.0), half, half),
            seed=seed,
            connectivity="component",
        )
    radius = radius_for_density(cfg.n_nodes, density)
    return generate_udg(
        cfg.n_nodes, radius, seed=seed, connectivity="component"
    )


def _seeds_for(cfg: ScenarioConfig, rep: int) -> Tuple[int, int]:
    # Keyed by replication only: parameter points share placements, so
    # cross-point comparisons (k ordering, density trends) are paired.
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(rep,))
    topo_seed, sim_seed = (int(x) for x in ss.generate_state(2))
    return topo_seed, sim_seed


def _dump_topology(cfg: ScenarioConfig, topology, density: float, k: int, rep: int):
    name = f"{cfg.scenario}_d{density:g}_k{k}_rep{rep}.txt"
    path = os.path.join(cfg.dump_dir, name)
    with open(path, "w") as fh:
        fh.write(to_text(topology))


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Execute every (parameter point, replication, policy) cell.

    Generation failures mark the point failed (n=0 rows) and the sweep
    continues; routing drops are ordinary outcomes, never errors.
    """
    result = ScenarioResult(cfg, [])
    if cfg.dump_dir:
        os.makedirs(cfg.dump_dir, exist_ok=True)
    for density, k in _parameter_points(cfg):
        # samples[policy][metric] -> list over replications
        samples: Dict[str, Dict[str, List[float]]] = {
            p: {m: [] for m in METRIC_NAMES} for p in cfg.policies
        }
        generated = 0
        for rep in range(cfg.n_topologies):
            topo_seed, sim_seed = _seeds_for(cfg, rep)
            try:
                topology = _make_topology(cfg, density, topo_seed)
            except (GenerationError, ParameterError) as exc:
                log.warning(
                    "generation failed at density=%g rep=%d: %s", density, rep, exc
                )
                continue
            generated += 1
            if cfg.dump_dir:
                _dump_topology(cfg, topology, density, k, rep)
            for policy in cfg.policies:
                rcfg = RoutingConfig(
                    k=k,
                    delta_d=cfg.delta_d,
                    guard_angle=cfg.guard_angle,
                    policy=policy,
                )
                run = run_simulation(
                    topology,
                    rcfg,
                    cfg.n_flows,
                    cfg.packets_per_flow,
                    seed=sim_seed,
                    check_invariants=cfg.check_invariants,
                )
                result.cap_aborts += run.cap_aborts()
                result.duplicate_forwards += run.duplicate_forward_events
                m = collect_metrics(run)
                samples[policy]["loss"].append(m.loss)
                samples[policy]["transmissions"].append(m.transmissions)
                if m.route_hops is not None:
                    samples[policy]["route_hops"].append(m.route_hops)
                if m.stretch is not None:
                    samples[policy]["stretch"].append(m.stretch)
        if generated == 0:
            result.failed_points.append((density, k))
        for policy in cfg.policies:
            for metric in METRIC_NAMES:
                vals = samples[policy][metric]
                mean, ci95 = aggregate(vals)
                result.records.append(
                    MetricsRecord(
                        cfg.scenario, policy, density, k, metric, mean, ci95, len(vals)
                    )
                )
    return result


# ---------------------------------------------------------------------- csv

def _fmt(x: Optional[float]) -> str:
    return "" if x is None else format(x, ".10g")


def write_csv(records: Sequence[MetricsRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.scenario,
                r.policy,
                format(r.density, "g"),
                r.k,
                r.metric,
                _fmt(r.mean),
                _fmt(r.ci95),
                r.n,
            ]
        )


def csv_text(records: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()
