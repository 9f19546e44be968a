"""Planar geometry for sector-based routing.

Distances, oriented angles on [0, 2*pi), and the algebra of blocked /
forbidden sectors: containment, angular distance to bounds, and merging.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

# Arc-membership tolerance in radians; sectors within this of a bound still
# count as containing the angle.
ANGLE_EPS = 1e-9

# Narrowest representable sector arc (2 * 1e-6 rad). Recording clamps up to
# this width, which is what frees angle_min == angle_max to mean full circle.
MIN_ARC_WIDTH = 2e-6

log = logging.getLogger(__name__)


class DegenerateGeometryError(ValueError):
    """Raised for operations undefined on coincident points."""


class Point(NamedTuple):
    x: float
    y: float


def euclid_dist(p: Point, q: Point) -> float:
    """Euclidean distance between two points."""
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    # sqrt(dx*dx + dy*dy), not hypot: keeps bit-parity with the C kernels.
    return math.sqrt(dx * dx + dy * dy)


def normalize_angle(a: float) -> float:
    """Map any finite angle to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod of a tiny negative can round up to 2*pi exactly
        a = 0.0
    return a


def ccw_delta(a: float, b: float) -> float:
    """Counterclockwise arc length from angle a to angle b, in [0, 2*pi)."""
    return normalize_angle(b - a)


def circular_distance(a: float, b: float) -> float:
    """Shortest angular distance between two angles, in [0, pi]."""
    d = ccw_delta(a, b)
    return d if d <= math.pi else TWO_PI - d


def oriented_angle(origin: Point, target: Point) -> float:
    """Angle of the vector origin->target, normalized to [0, 2*pi)."""
    dx = target[0] - origin[0]
    dy = target[1] - origin[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("oriented_angle undefined for coincident points")
    return normalize_angle(math.atan2(dy, dx))


@dataclass(frozen=True)
class Sector:
    """Angular wedge anchored at some apex, open-ended outward.

    The directed arc runs counterclockwise from angle_min to angle_max and
    may wrap across 0. A point belongs to the sector when its angle from the
    apex lies on the arc and its distance from the apex is >= d_min.

    angle_min == angle_max encodes the full circle; zero-width sectors are
    not representable (construction clamps to MIN_ARC_WIDTH).
    """

    angle_min: float
    angle_max: float
    d_min: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.angle_min) and math.isfinite(self.angle_max)):
            raise ValueError("sector bounds must be finite")
        if not (math.isfinite(self.d_min) and self.d_min >= 0.0):
            raise ValueError("d_min must be finite and non-negative")
        a_min = normalize_angle(self.angle_min)
        a_max = normalize_angle(self.angle_max)
        if a_min == a_max:
            # Full circle: one canonical anchor so equal sectors compare equal.
            a_min = a_max = 0.0
        object.__setattr__(self, "angle_min", a_min)
        object.__setattr__(self, "angle_max", a_max)

    @property
    def width(self) -> float:
        """Arc width in (0, 2*pi]; the full circle reports 2*pi."""
        if self.angle_min == self.angle_max:
            return TWO_PI
        return ccw_delta(self.angle_min, self.angle_max)

    def is_full(self) -> bool:
        return self.angle_min == self.angle_max


def angle_in_arc(sector: Sector, a: float) -> bool:
    """True when angle a lies on the sector's directed arc (within ANGLE_EPS)."""
    if sector.angle_min == sector.angle_max:
        return True
    da = ccw_delta(sector.angle_min, a)
    return da <= sector.width + ANGLE_EPS or da >= TWO_PI - ANGLE_EPS


def sector_contains(sector: Sector, apex: Point, p: Point) -> bool:
    """True when point p lies inside the sector anchored at apex."""
    d = euclid_dist(apex, p)
    if d == 0.0:
        if sector.d_min == 0.0:
            log.debug("sector_contains: point coincides with apex, angle undefined")
        return False
    if d < sector.d_min:
        return False
    return angle_in_arc(sector, oriented_angle(apex, p))


def angular_distance_to_bounds(sector: Sector, a: float) -> float:
    """Shortest angular distance from angle a to either sector bound."""
    return min(
        circular_distance(a, sector.angle_min),
        circular_distance(a, sector.angle_max),
    )


def try_merge(s1: Sector, s2: Sector, delta_d: float) -> Optional[Sector]:
    """Merge two sectors when their arcs overlap or touch and their minimal
    distances differ by at most delta_d; otherwise return None.

    The merged arc is the exact union; d_min is the smaller of the two, so a
    merge never claims a point unreachable that either input still allowed.
    """
    if abs(s1.d_min - s2.d_min) > delta_d:
        return None
    d_min = min(s1.d_min, s2.d_min)
    if s1.is_full():
        return Sector(s1.angle_min, s1.angle_min, d_min)
    if s2.is_full():
        return Sector(s2.angle_min, s2.angle_min, d_min)

    # Unwrap both arcs relative to s1's start so interval logic applies.
    a1 = s1.angle_min
    r1 = a1 + s1.width
    a2 = a1 + ccw_delta(a1, s2.angle_min)
    r2 = a2 + s2.width
    if a2 <= r1 + ANGLE_EPS:
        # s2 starts on (or touching) s1's arc.
        start = a1
        width = max(r1, r2) - a1
    elif r2 >= a1 + TWO_PI - ANGLE_EPS:
        # s2 wraps past zero and reaches s1's start from behind.
        start = a2
        width = max(r2, r1 + TWO_PI) - a2
    else:
        return None
    if width >= TWO_PI:
        s = normalize_angle(start)
        return Sector(s, s, d_min)
    return Sector(normalize_angle(start), normalize_angle(start + width), d_min)


def merge_sectors(sectors: Sequence[Sector], delta_d: float) -> List[Sector]:
    """Merge a sector list to a fixpoint where no pair satisfies try_merge.

    The list is canonically sorted before pairing, so the result depends only
    on the multiset of inputs, not their order.
    """
    result = sorted(sectors, key=lambda s: (s.angle_min, s.angle_max, s.d_min))
    merged_one = True
    while merged_one:
        merged_one = False
        n = len(result)
        for i in range(n):
            for j in range(i + 1, n):
                m = try_merge(result[i], result[j], delta_d)
                if m is not None:
                    del result[j]
                    del result[i]
                    result.append(m)
                    result.sort(key=lambda s: (s.angle_min, s.angle_max, s.d_min))
                    merged_one = True
                    break
            if merged_one:
                break
    return result


def minimal_covering_arc(angles: Sequence[float]) -> Tuple[float, float]:
    """Smallest (start, width) arc containing all given angles.

    A single angle yields width 0; callers clamp as needed. Ties between
    equal largest gaps resolve to the first in sorted order.
    """
    if not angles:
        raise ValueError("minimal_covering_arc needs at least one angle")
    ordered = sorted(normalize_angle(a) for a in angles)
    n = len(ordered)
    if n == 1:
        return ordered[0], 0.0
    best_gap = -1.0
    best_idx = 0
    for i in range(n):
        if i + 1 < n:
            gap = ordered[i + 1] - ordered[i]
        else:
            gap = TWO_PI - ordered[n - 1] + ordered[0]
        if gap > best_gap:
            best_gap = gap
            best_idx = i
    start = ordered[(best_idx + 1) % n]
    return start, TWO_PI - best_gap


def sector_to_line(s: Sector) -> str:
    """Canonical one-line text form, exact round-trip via float repr."""
    return f"{s.angle_min!r} {s.angle_max!r} {s.d_min!r}"


def sector_from_line(line: str) -> Sector:
    parts = line.split()
    if len(parts) != 3:
        raise ValueError(f"malformed sector line: {line!r}")
    return Sector(float(parts[0]), float(parts[1]), float(parts[2]))
