"""Per-hop packet lifecycle engine over a static topology.

Flows run strictly sequentially on persistent node state, so knowledge
gathered by early packets speeds up later ones. Two interchangeable engines
drive the policy decisions:

* the fast engine runs sector-mode decisions through the compiled (or pure
  fallback) kernels over a shared published-sector table, and

* the reference engine executes the routing module functions literally,
  node state dict by node state dict, and is the only engine that supports
  exact-blocking mode (use_sectors=False).

Both produce identical outcome logs for the configurations they share;
tests pin that equivalence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import routing
from ._backend import BACKEND_NAME, RunCore
from .geometry import Point, Sector
from .routing import (
    KhoodView,
    NeighborKnowledge,
    NodeState,
    POLICY_DEFLECTION,
    POLICY_GREEDY,
    POLICY_OPTIMIZED,
    RoutingConfig,
)
from .topology import Topology, hop_counts_from, k_neighborhood

log = logging.getLogger(__name__)

DROP_NO_ROUTE = "no-route"
DROP_SAFETY_CAP = "safety-cap"

_POLICY_CODES = {POLICY_GREEDY: 0, POLICY_DEFLECTION: 1, POLICY_OPTIMIZED: 2}

# walk_forward statuses shared by both engines
_DELIVERED = 0
_BLOCKED = 1
_CAP = 2
_DROPPED = 3

_INITIAL_ROW_CAPACITY = 8


@dataclass
class Packet:
    """One packet in flight; trace includes backtrack moves."""

    flow_id: int
    seq: int
    src: int
    dest_id: int
    dest_pos: Point
    trace: List[int] = field(default_factory=list)
    backtrack_stack: List[int] = field(default_factory=list)
    transmissions: int = 0

    def __post_init__(self) -> None:
        if not self.trace:
            self.trace = [self.src]
        if not self.backtrack_stack:
            self.backtrack_stack = [self.src]


@dataclass(frozen=True)
class FlowOutcome:
    delivered: bool
    route_hops: int  # forward hops of the delivered path; -1 if dropped
    total_transmissions: int
    shortest_hops: int
    drop_reason: Optional[str] = None


@dataclass
class RunMetrics:
    """Per-run aggregates; rate fields are None when no packet qualifies."""

    loss: float
    route_hops: Optional[float]
    stretch: Optional[float]
    transmissions: float
    delivered: int
    total: int


@dataclass
class SimulationRun:
    topology: Topology
    cfg: RoutingConfig
    node_states: List[NodeState]
    flows: List[Tuple[int, int]]
    outcomes: List[FlowOutcome]
    seed: int
    packets_per_flow: int = 1
    engine: object = field(default=None, repr=False)
    check_invariants: bool = False
    duplicate_forward_events: int = 0

    def cap_aborts(self) -> int:
        return sum(1 for o in self.outcomes if o.drop_reason == DROP_SAFETY_CAP)


def resolve_delta_d(topology: Topology, cfg: RoutingConfig) -> float:
    """Config value, or half the radio range when left unset."""
    if cfg.delta_d is not None:
        return cfg.delta_d
    if topology.radio_range is None:
        raise ValueError("delta_d unset and topology has no radio_range")
    return 0.5 * topology.radio_range


# ---------------------------------------------------------------- reference


class _ReferenceEngine:
    """Literal execution of the routing functions on per-node dict state."""

    name = "reference"

    def __init__(self, topology: Topology, cfg: RoutingConfig, delta_d: float):
        self.topology = topology
        self.cfg = cfg
        self.delta_d = delta_d
        pos = topology.positions
        self.points = [Point(float(pos[i, 0]), float(pos[i, 1])) for i in range(topology.n)]
        self.nbr_pairs: List[List[Tuple[int, Point]]] = [
            [(int(v), self.points[int(v)]) for v in topology.neighbors(u)]
            for u in range(topology.n)
        ]
        self._nbr_sets = [frozenset(v for v, _ in pairs) for pairs in self.nbr_pairs]
        self._khood_sets: Dict[int, frozenset] = {}
        self._khood_views: Dict[int, KhoodView] = {}
        self._hops_cache: Dict[int, np.ndarray] = {}
        self.reset()

    def reset(self) -> None:
        self.states = [NodeState(i, self.points[i]) for i in range(self.topology.n)]

    def _khood(self, u: int) -> frozenset:
        got = self._khood_sets.get(u)
        if got is None:
            got = frozenset(k_neighborhood(self.topology, u, self.cfg.k))
            self._khood_sets[u] = got
        return got

    def _khood_view(self, u: int) -> KhoodView:
        got = self._khood_views.get(u)
        if got is None:
            members = self._khood(u)
            got = KhoodView(
                positions={m: self.points[m] for m in members},
                adjacency={m: self._nbr_sets[m] for m in members},
            )
            self._khood_views[u] = got
        return got

    def hops_from(self, src: int) -> np.ndarray:
        return hop_counts_from(self.topology, src)

    def _decide(
        self, u: int, dest_id: int, dest_pos: Point, prev: Optional[int]
    ) -> routing.RoutingDecision:
        state = self.states[u]
        nbrs = self.nbr_pairs[u]
        policy = self.cfg.policy
        if policy == POLICY_GREEDY:
            return routing.greedy_next_hop(state, nbrs, dest_pos)
        if policy == POLICY_DEFLECTION:
            return routing.reactive_deflection(
                state, nbrs, dest_pos, prev, self.cfg, self.delta_d
            )
        forbidden = routing.compute_forbidden_sector(
            state, self._khood_view(u), dest_pos, self.cfg
        )
        return routing.modified_reactive_deflection(
            state, nbrs, dest_pos, prev, forbidden, self.cfg, self.delta_d
        )

    def walk_forward(
        self, start: int, prev: Optional[int], dest_id: int, dest_pos: Point, budget: int
    ) -> Tuple[int, List[int], Tuple[Sector, ...]]:
        chain: List[int] = []
        u = start
        used = 0
        while True:
            if u == dest_id:
                return _DELIVERED, chain, ()
            if used >= budget:
                return _CAP, chain, ()
            dec = self._decide(u, dest_id, dest_pos, prev)
            if dec.kind == routing.FORWARD:
                chain.append(dec.next_hop)
                prev = u
                u = dec.next_hop
                used += 1
            elif dec.kind == routing.BACKTRACK:
                return _BLOCKED, chain, dec.advertised_sectors
            else:
                return _DROPPED, chain, ()

    def on_backtrack(
        self, origin: int, receiver: int, dest_pos: Point, advertised: Tuple[Sector, ...]
    ) -> None:
        """Receiver learns from the returned packet; origin floods k hops."""
        rec = self.states[receiver].neighbor_blocked.get(origin)
        if rec is None:
            rec = NeighborKnowledge(self.points[origin])
            self.states[receiver].neighbor_blocked[origin] = rec
        rec.exact.add(dest_pos)
        rec.sectors = list(advertised)
        self.propagate(origin)

    def propagate(self, origin: int) -> None:
        """Hello flood: replace the origin's advertised list within k hops."""
        sectors = self.states[origin].blocked_sectors
        origin_nbrs = self._nbr_sets[origin]
        for w in self._khood(origin):
            self.states[w].khood_blocked[origin] = list(sectors)
            if w in origin_nbrs:
                rec = self.states[w].neighbor_blocked.get(origin)
                if rec is None:
                    rec = NeighborKnowledge(self.points[origin])
                    self.states[w].neighbor_blocked[origin] = rec
                rec.sectors = list(sectors)


# --------------------------------------------------------------------- fast


class _FastEngine:
    """Kernel-driven engine over a shared published-sector table.

    Works in sector mode only: a node's merge-normalized sector list is
    published to the table whenever the node backtracks, which under the
    instantaneous-flood model is exactly when any other node could learn
    it. Readers are scoped at query time (neighbors for blocked tests, the
    k-hood CSR for forbidden sectors), so one table serves all observers.
    """

    name = "fast"

    def __init__(self, topology: Topology, cfg: RoutingConfig, delta_d: float):
        if not cfg.use_sectors:
            raise ValueError("fast engine supports sector mode only")
        self.topology = topology
        self.cfg = cfg
        self.delta_d = delta_d
        self._policy_code = _POLICY_CODES[cfg.policy]
        n = topology.n
        pos = topology.positions
        self.points = [Point(float(pos[i, 0]), float(pos[i, 1])) for i in range(n)]
        self.core = RunCore(
            np.ascontiguousarray(pos[:, 0]),
            np.ascontiguousarray(pos[:, 1]),
            topology.indptr.astype(np.int32),
            topology.indices.astype(np.int32),
        )
        if cfg.policy == POLICY_OPTIMIZED:
            kh_indptr = np.zeros(n + 1, dtype=np.int64)
            chunks = []
            buf = np.empty(n, dtype=np.int32)
            for u in range(n):
                m = self.core.khood_collect(u, cfg.k, buf)
                chunks.append(buf[:m].copy())
                kh_indptr[u + 1] = kh_indptr[u] + m
            kh_ids = (
                np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
            )
            self.core.set_khood(kh_indptr, np.ascontiguousarray(kh_ids, dtype=np.int32))
        self._chain_buf = np.empty(
            max(cfg.safety_cap_factor * n, 1), dtype=np.int32
        )
        self._hops_cache: Dict[int, np.ndarray] = {}
        self.reset()

    def reset(self) -> None:
        n = self.topology.n
        self.states = [NodeState(i, self.points[i]) for i in range(n)]
        self._capacity = _INITIAL_ROW_CAPACITY
        self._counts = np.zeros(n, dtype=np.int32)
        self._amin = np.zeros((n, self._capacity), dtype=np.float64)
        self._amax = np.zeros((n, self._capacity), dtype=np.float64)
        self._dmin = np.zeros((n, self._capacity), dtype=np.float64)
        self.core.set_sector_table(self._counts, self._amin, self._amax, self._dmin)
        self.core.bump_version()

    def hops_from(self, src: int) -> np.ndarray:
        out = np.empty(self.topology.n, dtype=np.int32)
        self.core.bfs_fill(src, out)
        return out

    def _grow_rows(self, need: int) -> None:
        while self._capacity < need:
            self._capacity *= 2
        for name in ("_amin", "_amax", "_dmin"):
            old = getattr(self, name)
            new = np.zeros((len(old), self._capacity), dtype=np.float64)
            new[:, : old.shape[1]] = old
            setattr(self, name, new)
        self.core.set_sector_table(self._counts, self._amin, self._amax, self._dmin)

    def _publish(self, u: int) -> None:
        sectors = self.states[u].blocked_sectors
        if len(sectors) > self._capacity:
            self._grow_rows(len(sectors))
        for j, s in enumerate(sectors):
            self._amin[u, j] = s.angle_min
            self._amax[u, j] = s.angle_max
            self._dmin[u, j] = s.d_min
        self._counts[u] = len(sectors)
        self.core.bump_version()

    def _record_block(self, u: int, dest_pos: Point) -> Tuple[Sector, ...]:
        """Mirror of the routing failure path against published knowledge.

        The usability test inside record_blocked consults neighbor_blocked,
        so a transient view of the neighbors' published rows is installed
        for the duration of the call. Published rows are precisely what the
        kernels consulted when they declared the block, keeping both code
        paths on one knowledge base.
        """
        state = self.states[u]
        state.blocked_exact.add(dest_pos)
        nbrs = []
        view: Dict[int, NeighborKnowledge] = {}
        for v in self.topology.neighbors(u):
            v = int(v)
            nbrs.append((v, self.points[v]))
            cnt = int(self._counts[v])
            if cnt:
                view[v] = NeighborKnowledge(
                    self.points[v],
                    sectors=[
                        Sector(self._amin[v, j], self._amax[v, j], self._dmin[v, j])
                        for j in range(cnt)
                    ],
                )
        state.neighbor_blocked = view
        routing.record_blocked(state, dest_pos, nbrs, self.delta_d)
        state.neighbor_blocked = {}
        return tuple(state.blocked_sectors)

    def walk_forward(
        self, start: int, prev: Optional[int], dest_id: int, dest_pos: Point, budget: int
    ) -> Tuple[int, List[int], Tuple[Sector, ...]]:
        status, length = self.core.walk(
            self._policy_code,
            start,
            dest_id,
            dest_pos.x,
            dest_pos.y,
            budget,
            self.cfg.guard_angle,
            self._chain_buf,
        )
        chain = [int(v) for v in self._chain_buf[:length]]
        if status != _BLOCKED:
            return status, chain, ()
        u = chain[-1] if chain else start
        if self.cfg.policy == POLICY_GREEDY:
            return _DROPPED, chain, ()
        advertised = self._record_block(u, dest_pos)
        if prev is None and not chain:
            return _DROPPED, chain, advertised  # blocked at the source itself
        return _BLOCKED, chain, advertised

    def on_backtrack(
        self, origin: int, receiver: int, dest_pos: Point, advertised: Tuple[Sector, ...]
    ) -> None:
        self._publish(origin)

    def propagate(self, origin: int) -> None:
        self._publish(origin)


# ------------------------------------------------------------------- driver

def forward_packet(run: SimulationRun, packet: Packet) -> FlowOutcome:
    """Drive one packet to a terminal state, mutating node knowledge.

    The engine chains forward moves; this loop owns the backtrack stack,
    the trace, and the safety cap.
    """
    engine = run.engine
    cap = run.cfg.safety_cap_factor * run.topology.n
    stack = packet.backtrack_stack
    trace = packet.trace
    shortest = _shortest_hops(run, packet.src, packet.dest_id)
    seen_forwards = set() if run.check_invariants else None

    while True:
        current = stack[-1]
        prev = stack[-2] if len(stack) >= 2 else None
        status, chain, advertised = engine.walk_forward(
            current, prev, packet.dest_id, packet.dest_pos, cap - packet.transmissions
        )
        if seen_forwards is not None:
            u = current
            for v in chain:
                if (u, v) in seen_forwards:
                    run.duplicate_forward_events += 1
                seen_forwards.add((u, v))
                u = v
        stack.extend(chain)
        trace.extend(chain)
        packet.transmissions += len(chain)

        if status == _DELIVERED:
            return FlowOutcome(
                delivered=True,
                route_hops=len(stack) - 1,
                total_transmissions=packet.transmissions,
                shortest_hops=shortest,
            )
        if status == _CAP:
            log.warning(
                "safety cap hit: flow=%d seq=%d src=%d dst=%d",
                packet.flow_id, packet.seq, packet.src, packet.dest_id,
            )
            return FlowOutcome(False, -1, packet.transmissions, shortest, DROP_SAFETY_CAP)
        if status == _DROPPED:
            return FlowOutcome(False, -1, packet.transmissions, shortest, DROP_NO_ROUTE)

        # blocked mid-path: hand the packet back and spread the news
        blocked_node = stack[-1]
        if len(stack) < 2:
            return FlowOutcome(False, -1, packet.transmissions, shortest, DROP_NO_ROUTE)
        receiver = stack[-2]
        engine.on_backtrack(blocked_node, receiver, packet.dest_pos, advertised)
        stack.pop()
        trace.append(receiver)
        packet.transmissions += 1


def _shortest_hops(run: SimulationRun, src: int, dst: int) -> int:
    cache = run.engine._hops_cache
    hops = cache.get(dst)
    if hops is None:
        hops = run.engine.hops_from(dst)
        cache[dst] = hops
    return int(hops[src])


# ---------------------------------------------------------------- run setup

def _make_engine(topology: Topology, cfg: RoutingConfig, engine: Optional[str]):
    if engine is None:
        engine = "fast" if cfg.use_sectors else "reference"
    if engine == "fast":
        return _FastEngine(topology, cfg, resolve_delta_d(topology, cfg))
    if engine == "reference":
        return _ReferenceEngine(topology, cfg, resolve_delta_d(topology, cfg))
    raise ValueError(f"unknown engine {engine!r}")


def sample_flows(
    topology: Topology, n_flows: int, rng: np.random.Generator
) -> List[Tuple[int, int]]:
    """Random (src, dst) pairs, resampling any with src = dst."""
    flows = []
    n = topology.n
    for _ in range(n_flows):
        while True:
            src = int(rng.integers(0, n))
            dst = int(rng.integers(0, n))
            if src != dst:
                break
        flows.append((src, dst))
    return flows


def run_simulation(
    topology: Topology,
    cfg: RoutingConfig,
    n_flows: int,
    packets_per_flow: int,
    seed: int,
    engine: Optional[str] = None,
    check_invariants: bool = False,
) -> SimulationRun:
    """Execute n_flows sequential flows of packets_per_flow packets each.

    Node knowledge persists across packets and flows unless
    cfg.reset_between_flows asks for a cold start per flow. Failures are
    recorded as outcomes, never raised. check_invariants counts duplicate
    (node, next-hop) forward events per packet, which loop freedom says
    must never occur.
    """
    eng = _make_engine(topology, cfg, engine)
    rng = np.random.default_rng(seed)
    flows = sample_flows(topology, n_flows, rng)
    run = SimulationRun(
        topology=topology,
        cfg=cfg,
        node_states=eng.states,
        flows=flows,
        outcomes=[],
        seed=seed,
        packets_per_flow=packets_per_flow,
        engine=eng,
        check_invariants=check_invariants,
    )
    for flow_id, (src, dst) in enumerate(flows):
        if cfg.reset_between_flows and flow_id > 0:
            eng.reset()
            run.node_states = eng.states
        dest_pos = eng.points[dst]
        for seq in range(packets_per_flow):
            packet = Packet(flow_id, seq, src, dst, dest_pos)
            run.outcomes.append(forward_packet(run, packet))
    return run


def propagate_blocked_info(run: SimulationRun, origin: int, k: Optional[int] = None) -> None:
    """Flood the origin's current sector list to its k-hop neighborhood."""
    if k is not None and k != run.cfg.k:
        raise ValueError("propagation scope is fixed by cfg.k for a run")
    run.engine.propagate(origin)


# ------------------------------------------------------------------ metrics

def collect_metrics(run: SimulationRun) -> RunMetrics:
    outcomes = run.outcomes
    return _metrics_from_outcomes(outcomes)


def _metrics_from_outcomes(outcomes: Sequence[FlowOutcome]) -> RunMetrics:
    total = len(outcomes)
    delivered = [o for o in outcomes if o.delivered]
    loss = (total - len(delivered)) / total if total else 0.0
    route = (
        sum(o.route_hops for o in delivered) / len(delivered) if delivered else None
    )
    stretch = (
        sum(o.route_hops / o.shortest_hops for o in delivered) / len(delivered)
        if delivered
        else None
    )
    transmissions = (
        sum(o.total_transmissions for o in outcomes) / total if total else 0.0
    )
    return RunMetrics(loss, route, stretch, transmissions, len(delivered), total)


# -------------------------------------------------------------- outcome log

def outcome_log_lines(run: SimulationRun) -> List[str]:
    """One `flow seq src dst delivered route_hops transmissions shortest
    drop_reason` record per packet; '-' marks an absent drop reason."""
    lines = []
    ppf = run.packets_per_flow
    for i, o in enumerate(run.outcomes):
        flow_id, seq = divmod(i, ppf)
        src, dst = run.flows[flow_id]
        lines.append(
            f"{flow_id} {seq} {src} {dst} {1 if o.delivered else 0} "
            f"{o.route_hops} {o.total_transmissions} {o.shortest_hops} "
            f"{o.drop_reason or '-'}"
        )
    return lines


def parse_outcome_log(lines: Iterable[str]) -> List[FlowOutcome]:
    outcomes = []
    for line in lines:
        parts = line.split()
        if len(parts) != 9:
            raise ValueError(f"malformed outcome record: {line!r}")
        outcomes.append(
            FlowOutcome(
                delivered=parts[4] == "1",
                route_hops=int(parts[5]),
                total_transmissions=int(parts[6]),
                shortest_hops=int(parts[7]),
                drop_reason=None if parts[8] == "-" else parts[8],
            )
        )
    return outcomes


def metrics_from_log(lines: Iterable[str]) -> RunMetrics:
    return _metrics_from_outcomes(parse_outcome_log(lines))
