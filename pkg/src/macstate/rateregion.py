"""Achievable-rate pentagons and convex region geometry in the (R1, R2) plane.

For one fixed auxiliary policy, each cooperation setting yields a *pentagon*:
the polygon cut from the first quadrant by an R1 bound, an R2 bound, and a
sum bound.  The full region is convex, so it is represented as the
upper-right frontier (a concave polyline) of the convex hull of a union of
pentagons; the hull realizes time sharing between policies.

Pentagon evaluation consumes the joints produced by
:func:`macstate.macmodel.assemble_joint`; axis names are fixed to
``(s1, s2, u[, v], x1, x2, y)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .probcore import JointPmf, ValidationError, conditional_mutual_information

FEAS_TOL = 1e-12         # slack when testing cooperation-rate feasibility
DEDUP_TOL = 1e-9         # frontier vertices closer than this collapse
MAX_FRONTIER_VERTICES = 4000

S_AXES = ("s1", "s2")


class WrongModeJoint(ValidationError):
    """A joint with the wrong factorization was passed to a pentagon rule."""


class RatePoint(NamedTuple):
    r1: float
    r2: float


@dataclass(frozen=True)
class Pentagon:
    """Rate bounds for one policy: r1 <= a1, r2 <= a2, r1 + r2 <= a12.

    Infeasible pentagons (cooperation-rate constraint violated) are values,
    not errors: they simply contribute nothing to a region.
    """

    a1: float
    a2: float
    a12: float
    feasible: bool = True

    def __post_init__(self) -> None:
        if self.feasible:
            for name in ("a1", "a2", "a12"):
                v = getattr(self, name)
                if not np.isfinite(v) or v < 0:
                    raise ValidationError(f"pentagon bound {name} must be finite and >= 0, got {v}")

    @staticmethod
    def infeasible() -> "Pentagon":
        return Pentagon(0.0, 0.0, 0.0, feasible=False)

    def vertices(self) -> list[RatePoint]:
        """Polygon corners, frontier order: (0, r2max) .. (r1max, 0)."""
        if not self.feasible:
            return []
        s = min(self.a12, self.a1 + self.a2)
        pts = [RatePoint(0.0, min(self.a2, s))]
        if s < self.a1 + self.a2 - 1e-15:  # sum bound cuts the corner
            pts.append(RatePoint(max(0.0, s - self.a2), min(self.a2, s)))
            pts.append(RatePoint(min(self.a1, s), max(0.0, s - self.a1)))
        else:
            pts.append(RatePoint(self.a1, self.a2))
        pts.append(RatePoint(min(self.a1, s), 0.0))
        # Collapse duplicates from degenerate bounds.
        out: list[RatePoint] = []
        for p in pts:
            if not out or abs(p.r1 - out[-1].r1) > 1e-15 or abs(p.r2 - out[-1].r2) > 1e-15:
                out.append(p)
        return out

    def contains(self, p: RatePoint, tol: float = 0.0) -> bool:
        if not self.feasible:
            return False
        return (
            -tol <= p.r1 <= self.a1 + tol
            and -tol <= p.r2 <= self.a2 + tol
            and p.r1 + p.r2 <= self.a12 + tol
        )

    def support(self, mu1: float, mu2: float) -> float:
        """max of mu1*r1 + mu2*r2 over the pentagon."""
        if not self.feasible:
            return float("-inf")
        s = min(self.a12, self.a1 + self.a2)
        x1 = min(self.a1, s)
        v1 = (x1, min(self.a2, s - x1))
        y2 = min(self.a2, s)
        v2 = (min(self.a1, s - y2), y2)
        return max(mu1 * v1[0] + mu2 * v1[1], mu1 * v2[0] + mu2 * v2[1])


@dataclass(frozen=True)
class RateRegion:
    """Upper-right frontier of a convex rate region, sorted by increasing r1.

    The region itself is the downward closure: all (r1, r2) >= 0 lying on or
    below the polyline.  The first vertex sits on the R2 axis and the last on
    the R1 axis.  An empty tuple denotes the empty region.
    """

    boundary: tuple[RatePoint, ...]

    @property
    def is_empty(self) -> bool:
        return len(self.boundary) == 0

    @property
    def max_r1(self) -> float:
        return self.boundary[-1].r1 if self.boundary else 0.0

    @property
    def max_r2(self) -> float:
        return self.boundary[0].r2 if self.boundary else 0.0

    def polygon(self) -> list[RatePoint]:
        """Closed polygon vertices: origin plus the frontier."""
        if self.is_empty:
            return []
        pts = [RatePoint(0.0, 0.0)] if (self.boundary[0].r2 > 0 or self.boundary[-1].r1 > 0) else []
        return pts + list(self.boundary)


# ---------------------------------------------------------------------------
# pentagon rules, one per cooperation setting
# ---------------------------------------------------------------------------

def _cmi(j: JointPmf, a, b, c=()):
    return conditional_mutual_information(j, a, b, c)


def _require_axes(j: JointPmf, with_v: bool, rule: str) -> None:
    has_v = "v" in j.axes
    if with_v and not has_v:
        raise WrongModeJoint(f"{rule} needs a joint with a V axis, got axes {j.axes}")
    if not with_v and has_v:
        raise WrongModeJoint(f"{rule} expects a one-way-family joint without V, got axes {j.axes}")
    for name in ("s1", "s2", "u", "x1", "x2", "y"):
        if name not in j.axes:
            raise WrongModeJoint(f"{rule} needs axis {name!r}, got {j.axes}")


def _clamp(x: float) -> float:
    return max(0.0, x)


def pentagon_one_way(j: JointPmf, c12: float) -> Pentagon:
    """Message-and-state cooperation over a single forward link."""
    _require_axes(j, with_v=False, rule="pentagon_one_way")
    i_us = _cmi(j, ["u"], S_AXES)
    if i_us > c12 + FEAS_TOL:
        return Pentagon.infeasible()
    credit = c12 - i_us
    a1 = _cmi(j, ["x1"], ["y"], ["x2", *S_AXES, "u"]) + credit
    a2 = _cmi(j, ["x2"], ["y"], ["x1", *S_AXES, "u"])
    a12 = min(_cmi(j, ["x1", "x2"], ["y"], [*S_AXES, "u"]) + credit,
              _cmi(j, ["x1", "x2"], ["y"], S_AXES))
    return Pentagon(_clamp(a1), _clamp(a2), _clamp(a12))


def pentagon_two_way(j: JointPmf, c12: float, c21: float) -> Pentagon:
    """Two-way cooperation with partial state at each encoder."""
    _require_axes(j, with_v=True, rule="pentagon_two_way")
    i_us = _cmi(j, ["u"], ["s1"], ["s2"])
    i_vs = _cmi(j, ["v"], ["s2"], ["s1", "u"])
    if i_us > c12 + FEAS_TOL or i_vs > c21 + FEAS_TOL:
        return Pentagon.infeasible()
    cr12 = c12 - i_us
    cr21 = c21 - i_vs
    cond = [*S_AXES, "u", "v"]
    a1 = _cmi(j, ["x1"], ["y"], ["x2", *cond]) + cr12
    a2 = _cmi(j, ["x2"], ["y"], ["x1", *cond]) + cr21
    a12 = min(_cmi(j, ["x1", "x2"], ["y"], cond) + cr12 + cr21,
              _cmi(j, ["x1", "x2"], ["y"], S_AXES))
    return Pentagon(_clamp(a1), _clamp(a2), _clamp(a12))


def pentagon_split(j: JointPmf, c12m: float, c12s: float) -> Pentagon:
    """Separate message-only and state-only links from encoder 1."""
    _require_axes(j, with_v=True, rule="pentagon_split")
    if _cmi(j, ["v"], ["u", *S_AXES]) > 1e-10:
        raise WrongModeJoint("pentagon_split requires V independent of (U, S); use a split-mode joint")
    i_us = _cmi(j, ["u"], S_AXES)
    if i_us > c12s + FEAS_TOL:
        return Pentagon.infeasible()
    cond = [*S_AXES, "u", "v"]
    a1 = _cmi(j, ["x1"], ["y"], ["x2", *cond]) + c12m
    a2 = _cmi(j, ["x2"], ["y"], ["x1", *cond])
    a12 = min(_cmi(j, ["x1", "x2"], ["y"], cond) + c12m,
              _cmi(j, ["x1", "x2"], ["y"], [*S_AXES, "u"]))
    return Pentagon(_clamp(a1), _clamp(a2), _clamp(a12))


def pentagon_state_only(j: JointPmf, c12: float) -> Pentagon:
    """Cooperation link carries state description only (no message credit).

    Feasibility is the inequality I(U;S) <= c12: under maximization it traces
    the same region as pinning the link rate exactly, without an equality
    constraint in the search.
    """
    _require_axes(j, with_v=False, rule="pentagon_state_only")
    if _cmi(j, ["u"], S_AXES) > c12 + FEAS_TOL:
        return Pentagon.infeasible()
    a1 = _cmi(j, ["x1"], ["y"], ["x2", *S_AXES, "u"])
    a2 = _cmi(j, ["x2"], ["y"], ["x1", *S_AXES, "u"])
    a12 = _cmi(j, ["x1", "x2"], ["y"], [*S_AXES, "u"])
    return Pentagon(_clamp(a1), _clamp(a2), _clamp(a12))


def pentagon_message_only(j: JointPmf, c12: float) -> Pentagon:
    """Cooperation link shares message bits only; requires U independent of S."""
    _require_axes(j, with_v=False, rule="pentagon_message_only")
    if _cmi(j, ["u"], S_AXES) >= 1e-9:
        raise WrongModeJoint("pentagon_message_only requires I(U;S) < 1e-9")
    a1 = _cmi(j, ["x1"], ["y"], ["x2", *S_AXES, "u"]) + c12
    a2 = _cmi(j, ["x2"], ["y"], ["x1", *S_AXES, "u"])
    a12 = min(_cmi(j, ["x1", "x2"], ["y"], [*S_AXES, "u"]) + c12,
              _cmi(j, ["x1", "x2"], ["y"], S_AXES))
    return Pentagon(_clamp(a1), _clamp(a2), _clamp(a12))


# ---------------------------------------------------------------------------
# hull construction, containment, comparison
# ---------------------------------------------------------------------------

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone-chain hull, counterclockwise, no repeated endpoint."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_union(pentagons: Iterable[Pentagon]) -> RateRegion:
    """Upper-right frontier of the convex hull of a pentagon union.

    Infeasible pentagons are skipped; if none are feasible the region is
    empty.  The frontier realizes time-sharing chords between pentagons.
    """
    pts: list[tuple[float, float]] = []
    for p in pentagons:
        for v in p.vertices():
            pts.append((v.r1, v.r2))
    if not pts:
        return RateRegion(())
    pts.append((0.0, 0.0))
    hull = _convex_hull(pts)
    # Pareto-maximal hull vertices form the frontier interior.
    frontier = []
    for p in hull:
        dominated = any(
            (q[0] >= p[0] - 1e-15 and q[1] >= p[1] - 1e-15 and (q[0] > p[0] + 1e-15 or q[1] > p[1] + 1e-15))
            for q in hull
        )
        if not dominated:
            frontier.append(p)
    frontier.sort(key=lambda p: (p[0], -p[1]))
    # Anchor the polyline on both axes.
    if frontier[0][0] > 0.0:
        frontier.insert(0, (0.0, frontier[0][1]))
    if frontier[-1][1] > 0.0:
        frontier.append((frontier[-1][0], 0.0))
    deduped: list[RatePoint] = []
    for p in frontier:
        if not deduped or abs(p[0] - deduped[-1].r1) > DEDUP_TOL or abs(p[1] - deduped[-1].r2) > DEDUP_TOL:
            deduped.append(RatePoint(float(p[0]), float(p[1])))
    if len(deduped) > MAX_FRONTIER_VERTICES:
        keep = np.linspace(0, len(deduped) - 1, MAX_FRONTIER_VERTICES).round().astype(int)
        deduped = [deduped[i] for i in dict.fromkeys(keep)]
    return RateRegion(tuple(deduped))


def region_contains(r: RateRegion, p: RatePoint, tol: float = 1e-9) -> bool:
    """True iff ``p`` lies in the region inflated by ``tol``."""
    if r.is_empty:
        return False
    if p.r1 < -tol or p.r2 < -tol:
        return False
    b = r.boundary
    if len(b) == 1:
        return p.r1 <= b[0].r1 + tol and p.r2 <= b[0].r2 + tol
    for a, c in zip(b[:-1], b[1:]):
        ex, ey = c.r1 - a.r1, c.r2 - a.r2
        norm = float(np.hypot(ex, ey))
        if norm < 1e-15:
            continue
        # Region lies right of each frontier edge traversed in increasing r1.
        cross = ex * (p.r2 - a.r2) - ey * (p.r1 - a.r1)
        if cross > tol * norm:
            return False
    return p.r1 <= r.max_r1 + tol and p.r2 <= r.max_r2 + tol


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom < 1e-30:
        return float(np.hypot(px - ax, py - ay))
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return float(np.hypot(px - (ax + t * dx), py - (ay + t * dy)))


def point_region_distance(p: RatePoint, r: RateRegion) -> float:
    """Euclidean distance from a point to the region (0 inside)."""
    if r.is_empty:
        return float(np.hypot(p.r1, p.r2))
    if region_contains(r, p, tol=0.0):
        return 0.0
    poly = r.polygon()
    if len(poly) == 1:
        return float(np.hypot(p.r1 - poly[0].r1, p.r2 - poly[0].r2))
    ring = poly + [poly[0]]
    return min(
        _point_segment_distance((p.r1, p.r2), (a.r1, a.r2), (b.r1, b.r2))
        for a, b in zip(ring[:-1], ring[1:])
    )


def _frontier_samples(r: RateRegion, per_edge: int = 8) -> list[RatePoint]:
    pts = list(r.boundary)
    for a, b in zip(r.boundary[:-1], r.boundary[1:]):
        for t in np.linspace(0.0, 1.0, per_edge + 2)[1:-1]:
            pts.append(RatePoint(a.r1 + t * (b.r1 - a.r1), a.r2 + t * (b.r2 - a.r2)))
    return pts


def directed_hausdorff(a: RateRegion, b: RateRegion) -> float:
    """sup over points of region ``a`` of the distance to region ``b``.

    For convex regions the supremum is attained at a polygon vertex of
    ``a``; edge samples are included as cheap insurance against degenerate
    geometry.
    """
    if a.is_empty:
        return 0.0
    if b.is_empty:
        return max(float(np.hypot(p.r1, p.r2)) for p in a.polygon())
    return max(point_region_distance(p, b) for p in a.polygon() + _frontier_samples(a))


def hausdorff_distance(a: RateRegion, b: RateRegion) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def region_compare(a: RateRegion, b: RateRegion, tol: float = 1e-9) -> str:
    """Classify the pair: 'equal', 'a_subset_b', 'b_subset_a', or 'crossing'.

    Convexity makes vertex containment a complete test up to ``tol``.
    """
    if a.is_empty or b.is_empty:
        raise ValidationError("region_compare requires two non-empty regions")
    a_in_b = all(region_contains(b, p, tol) for p in a.boundary)
    b_in_a = all(region_contains(a, p, tol) for p in b.boundary)
    if a_in_b and b_in_a:
        return "equal"
    if a_in_b:
        return "a_subset_b"
    if b_in_a:
        return "b_subset_a"
    return "crossing"


def frontier_is_concave(r: RateRegion, tol: float = 1e-9) -> bool:
    """Slopes along the frontier must be nonincreasing (within tol)."""
    b = r.boundary
    for p0, p1, p2 in zip(b[:-2], b[1:-1], b[2:]):
        if _cross((p0.r1, p0.r2), (p1.r1, p1.r2), (p2.r1, p2.r2)) > tol:
            return False
    return True


def region_to_csv(r: RateRegion, header: Sequence[str] = ()) -> str:
    """Frontier CSV: '#'-prefixed header lines, then r1,r2 rows (6 decimals)."""
    lines = [f"# {h}" for h in header]
    lines.append("r1,r2")
    for p in r.boundary:
        lines.append(f"{p.r1:.6f},{p.r2:.6f}")
    return "\n".join(lines) + "\n"
