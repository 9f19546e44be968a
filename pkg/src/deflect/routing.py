"""Per-node routing state and the forwarding policies.

Three policies build on each other: plain greedy forwarding, reactive
deflection (greedy plus blocked-direction learning and backtracking), and
an optimized variant that extrapolates a forbidden sector over the void
border and steers around it.

All functions are deterministic; ties between equally good neighbors go to
the smallest node id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .geometry import (
    MIN_ARC_WIDTH,
    TWO_PI,
    HALF_PI,
    Point,
    Sector,
    angular_distance_to_bounds,
    ccw_delta,
    circular_distance,
    euclid_dist,
    merge_sectors,
    minimal_covering_arc,
    oriented_angle,
    sector_contains,
)

log = logging.getLogger(__name__)

POLICY_GREEDY = "greedy"
POLICY_DEFLECTION = "deflection"
POLICY_OPTIMIZED = "deflection_optimized"
POLICIES = (POLICY_GREEDY, POLICY_DEFLECTION, POLICY_OPTIMIZED)

FORWARD = "forward"
BACKTRACK = "backtrack"
DROP = "drop"

MAX_GUARD_ANGLE = 0.7853981633974483  # pi/4


@dataclass(frozen=True)
class RoutingConfig:
    """Knobs shared by every node of one simulation.

    delta_d=None resolves to half the radio range when a simulation starts;
    use_sectors=False disables sector generalization (exact destinations
    only), which is the mode whose delivery behavior is provably equal to
    strictly-improving-path reachability.
    """

    k: int = 3
    delta_d: Optional[float] = None
    guard_angle: float = 0.0
    policy: str = POLICY_DEFLECTION
    use_sectors: bool = True
    reset_between_flows: bool = False
    safety_cap_factor: int = 4

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.guard_angle <= MAX_GUARD_ANGLE:
            raise ValueError("guard_angle must lie in [0, pi/4]")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.delta_d is not None and self.delta_d < 0:
            raise ValueError("delta_d must be non-negative")


@dataclass
class NeighborKnowledge:
    """What one node knows about a neighbor's blocked state."""

    position: Point
    exact: Set[Point] = field(default_factory=set)
    sectors: List[Sector] = field(default_factory=list)


@dataclass
class NodeState:
    """Mutable routing state of a single node.

    blocked_sectors has its apex at `position` and is kept merge-normalized.
    neighbor_blocked is learned from backtracked packets and hello floods;
    khood_blocked holds the advertised sector lists of every node within k
    hops (including direct neighbors).
    """

    self_id: int
    position: Point
    blocked_exact: Set[Point] = field(default_factory=set)
    blocked_sectors: List[Sector] = field(default_factory=list)
    neighbor_blocked: Dict[int, NeighborKnowledge] = field(default_factory=dict)
    khood_blocked: Dict[int, List[Sector]] = field(default_factory=dict)


@dataclass(frozen=True)
class KhoodView:
    """Read-only positions and adjacency for the nodes a router can see."""

    positions: Dict[int, Point]
    adjacency: Dict[int, Set[int]]


@dataclass(frozen=True)
class ForbiddenSector:
    sector: Sector
    source_set: frozenset


@dataclass(frozen=True)
class RoutingDecision:
    kind: str
    next_hop: Optional[int] = None
    advertised_sectors: Tuple[Sector, ...] = ()

    @staticmethod
    def forward(next_hop: int) -> "RoutingDecision":
        return RoutingDecision(FORWARD, next_hop)

    @staticmethod
    def backtrack(to: int, sectors: Sequence[Sector]) -> "RoutingDecision":
        return RoutingDecision(BACKTRACK, to, tuple(sectors))

    @staticmethod
    def drop() -> "RoutingDecision":
        return RoutingDecision(DROP)


Neighbor = Tuple[int, Point]


# ------------------------------------------------------------------ queries

def is_blocked_for(record: Optional[NeighborKnowledge], dest: Point) -> bool:
    """True when the recorded knowledge marks the neighbor blocked for dest,
    either exactly or through an advertised sector around it."""
    if record is None:
        return False
    if dest in record.exact:
        return True
    return any(sector_contains(s, record.position, dest) for s in record.sectors)


def _eligible(
    state: NodeState, neighbors: Sequence[Neighbor], dest: Point
) -> List[Tuple[int, Point, float]]:
    """Neighbors with strict distance improvement that are not known blocked."""
    d_self = euclid_dist(state.position, dest)
    out = []
    for nid, pos in neighbors:
        d = euclid_dist(pos, dest)
        if d >= d_self:
            continue
        if is_blocked_for(state.neighbor_blocked.get(nid), dest):
            continue
        out.append((nid, pos, d))
    return out


def greedy_next_hop(
    state: NodeState, neighbors: Sequence[Neighbor], dest: Point
) -> RoutingDecision:
    """Forward to the strictly closer neighbor nearest dest; drop if none.

    Classical greedy: no blocked-state consultation, no backtracking.
    """
    d_self = euclid_dist(state.position, dest)
    best_id = None
    best_d = d_self
    for nid, pos in neighbors:
        d = euclid_dist(pos, dest)
        if d < best_d or (d == best_d and best_id is not None and nid < best_id):
            best_id, best_d = nid, d
    if best_id is None:
        return RoutingDecision.drop()
    return RoutingDecision.forward(best_id)


# ----------------------------------------------------------------- learning

def record_blocked(
    state: NodeState,
    dest: Point,
    neighbors: Sequence[Neighbor],
    delta_d: float,
) -> Sector:
    """Derive and store the blocked sector after a failed forwarding attempt.

    A neighbor is usable for a direction theta when it is not known blocked
    for dest and its bearing is within a quarter turn of theta (it would
    improve on a destination at infinity along theta). The sector is the
    maximal arc around the bearing of dest in which no direction has a
    usable neighbor; d_min is the current distance to dest, so nearer
    destinations in the same directions stay unclaimed.
    """
    theta_d = oriented_angle(state.position, dest)
    d_min = euclid_dist(state.position, dest)

    usable_angles = []
    for nid, pos in neighbors:
        if is_blocked_for(state.neighbor_blocked.get(nid), dest):
            continue
        usable_angles.append(oriented_angle(state.position, pos))

    if not usable_angles:
        sector = Sector(0.0, 0.0, d_min)  # full circle
    else:
        fwd = TWO_PI  # ccw room from theta_d to the nearest half-plane start
        back = TWO_PI  # cw room from theta_d to the nearest half-plane end
        clamp = False
        for phi in usable_angles:
            if circular_distance(phi, theta_d) < HALF_PI:
                clamp = True  # dest direction itself has a usable neighbor
                break
            fwd = min(fwd, ccw_delta(theta_d, phi - HALF_PI))
            back = min(back, ccw_delta(phi + HALF_PI, theta_d))
        if clamp or fwd + back < MIN_ARC_WIDTH:
            half = MIN_ARC_WIDTH / 2.0
            sector = Sector(theta_d - half, theta_d + half, d_min)
        else:
            sector = Sector(theta_d - back, theta_d + fwd, d_min)

    state.blocked_sectors = merge_sectors(state.blocked_sectors + [sector], delta_d)
    return sector


def merge_all(state: NodeState, delta_d: float) -> List[Sector]:
    """Re-normalize the node's sector list before advertising it."""
    state.blocked_sectors = merge_sectors(state.blocked_sectors, delta_d)
    return state.blocked_sectors


# ----------------------------------------------------------------- policies

def _fail_blocked(
    state: NodeState,
    neighbors: Sequence[Neighbor],
    dest: Point,
    previous_hop: Optional[int],
    cfg: RoutingConfig,
    delta_d: float,
) -> RoutingDecision:
    """Shared failure path: mark self blocked, then backtrack or drop."""
    state.blocked_exact.add(dest)
    if cfg.use_sectors:
        record_blocked(state, dest, neighbors, delta_d)
        advertised = tuple(state.blocked_sectors)
    else:
        advertised = ()
    if previous_hop is None:
        return RoutingDecision.drop()
    return RoutingDecision.backtrack(previous_hop, advertised)


def reactive_deflection(
    state: NodeState,
    neighbors: Sequence[Neighbor],
    dest: Point,
    previous_hop: Optional[int],
    cfg: RoutingConfig,
    delta_d: float,
) -> RoutingDecision:
    """Greedy over non-blocked neighbors; on failure learn and backtrack."""
    eligible = _eligible(state, neighbors, dest)
    if not eligible:
        return _fail_blocked(state, neighbors, dest, previous_hop, cfg, delta_d)
    best = min(eligible, key=lambda e: (e[2], e[0]))
    return RoutingDecision.forward(best[0])


def closer_to_sector_limits(
    f: ForbiddenSector, apex: Point, p: Point, q: Point
) -> bool:
    """True when p's bearing is strictly nearer the sector bounds than q's."""
    ap = angular_distance_to_bounds(f.sector, oriented_angle(apex, p))
    aq = angular_distance_to_bounds(f.sector, oriented_angle(apex, q))
    return ap < aq


def modified_reactive_deflection(
    state: NodeState,
    neighbors: Sequence[Neighbor],
    dest: Point,
    previous_hop: Optional[int],
    forbidden: Optional[ForbiddenSector],
    cfg: RoutingConfig,
    delta_d: float,
) -> RoutingDecision:
    """Deflection that prefers eligible neighbors outside the forbidden
    sector; when every eligible neighbor sits inside it, take the one whose
    bearing is nearest the sector limits. Without a forbidden sector this
    is exactly reactive_deflection."""
    eligible = _eligible(state, neighbors, dest)
    if not eligible:
        return _fail_blocked(state, neighbors, dest, previous_hop, cfg, delta_d)
    if forbidden is None:
        best = min(eligible, key=lambda e: (e[2], e[0]))
        return RoutingDecision.forward(best[0])

    outside = [
        e
        for e in eligible
        if not sector_contains(forbidden.sector, state.position, e[1])
    ]
    if outside:
        best = min(outside, key=lambda e: (e[2], e[0]))
        return RoutingDecision.forward(best[0])

    # all eligible neighbors lie inside the sector: skirt its limits
    best = eligible[0]
    for cand in eligible[1:]:
        if closer_to_sector_limits(forbidden, state.position, cand[1], best[1]):
            best = cand
    return RoutingDecision.forward(best[0])


# --------------------------------------------------------- forbidden sector

def compute_forbidden_sector(
    state: NodeState,
    khood: KhoodView,
    dest: Point,
    cfg: RoutingConfig,
) -> Optional[ForbiddenSector]:
    """Extrapolate the void border from advertised k-hop blocked sectors.

    Qualifying nodes are the known blocked nodes whose own sector list
    covers dest. The best-aligned one (bearing closest to the bearing of
    dest) seeds a connected set grown over 1-hop adjacency among all known
    blocked nodes; the result is the minimal arc spanning the set, widened
    by the guard angle on each side.
    """
    theta_d = oriented_angle(state.position, dest)

    blocked_known = {
        b
        for b, sectors in state.khood_blocked.items()
        if sectors and b != state.self_id and b in khood.positions
    }
    best = None
    best_key = None
    for b in blocked_known:
        pos = khood.positions[b]
        if pos == state.position:
            continue
        if not any(sector_contains(s, pos, dest) for s in state.khood_blocked[b]):
            continue
        key = (circular_distance(theta_d, oriented_angle(state.position, pos)), b)
        if best_key is None or key < best_key:
            best, best_key = b, key
    if best is None:
        return None

    members = {best}
    frontier = [best]
    while frontier:
        u = frontier.pop()
        for v in khood.adjacency.get(u, ()):
            if v in blocked_known and v not in members:
                members.add(v)
                frontier.append(v)

    angles = []
    d_min = None
    for b in members:
        pos = khood.positions[b]
        angles.append(oriented_angle(state.position, pos))
        d = euclid_dist(state.position, pos)
        d_min = d if d_min is None else min(d_min, d)

    start, width = minimal_covering_arc(angles)
    start -= cfg.guard_angle
    width += 2.0 * cfg.guard_angle
    if width < MIN_ARC_WIDTH:
        center = start + width / 2.0
        start = center - MIN_ARC_WIDTH / 2.0
        width = MIN_ARC_WIDTH
    if width >= TWO_PI:
        sector = Sector(0.0, 0.0, d_min)
    else:
        sector = Sector(start, start + width, d_min)
    return ForbiddenSector(sector, frozenset(members))
