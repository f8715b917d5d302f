"""Exact 3D primitives: points, segments, axis-aligned cuboids and distances.

Scalar functions work on plain tuples; the ``*_many`` variants take numpy
arrays of shape ``(n, 3)`` and are what the graph and solver code use in bulk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

# absolute tolerance on denominators of the closest-point solve
DEGENERATE_TOL = 1e-12


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class Segment3(NamedTuple):
    a: Point3
    b: Point3

    @property
    def length(self) -> float:
        return math.dist(self.a, self.b)


@dataclass(frozen=True)
class Cuboid:
    """Closed axis-aligned box ``[lo, hi]``."""

    lo: Point3
    hi: Point3

    def __post_init__(self):
        lo = Point3(*map(float, self.lo))
        hi = Point3(*map(float, self.hi))
        if not all(math.isfinite(v) for v in lo + hi):
            raise ValueError("cuboid corners must be finite")
        if any(l > h for l, h in zip(lo, hi)):
            raise ValueError(f"cuboid lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_center(cls, center: Sequence[float], size: Sequence[float]) -> "Cuboid":
        c = np.asarray(center, float)
        h = np.broadcast_to(np.asarray(size, float) / 2.0, (3,))
        return cls(Point3(*(c - h)), Point3(*(c + h)))

    def contains_cuboid(self, other: "Cuboid") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi)
        )

    def intersects(self, other: "Cuboid") -> bool:
        return all(
            self.lo[i] <= other.hi[i] and other.lo[i] <= self.hi[i] for i in range(3)
        )

    @property
    def size(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)


def point_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return math.dist(p, q)


def _closest_params(d1, d2, r, a, e, f):
    """Clamped closest-point parameters (s, t) for two segments.

    Follows the standard parametric derivation; denominators below
    ``DEGENERATE_TOL`` are treated as degenerate (point or parallel).
    """
    if a <= DEGENERATE_TOL and e <= DEGENERATE_TOL:
        return 0.0, 0.0
    if a <= DEGENERATE_TOL:
        return 0.0, min(max(f / e, 0.0), 1.0)
    c = float(np.dot(d1, r))
    if e <= DEGENERATE_TOL:
        return min(max(-c / a, 0.0), 1.0), 0.0
    b = float(np.dot(d1, d2))
    denom = a * e - b * b
    s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > DEGENERATE_TOL else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(max(-c / a, 0.0), 1.0)
    elif t > 1.0:
        t = 1.0
        s = min(max((b - c) / a, 0.0), 1.0)
    return s, t


def segment_distance(s1: Segment3, s2: Segment3) -> float:
    """Minimum Euclidean distance between two closed segments.

    Degenerate segments (``a == b``) are points, so this also yields
    point-segment and point-point distances.
    """
    p1, q1 = np.asarray(s1[0], float), np.asarray(s1[1], float)
    p2, q2 = np.asarray(s2[0], float), np.asarray(s2[1], float)
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = float(d1 @ d1), float(d2 @ d2), float(d2 @ r)
    s, t = _closest_params(d1, d2, r, a, e, f)
    return float(np.linalg.norm((p1 + d1 * s) - (p2 + d2 * t)))


def segment_distance_many(a0, a1, b0, b1) -> np.ndarray:
    """Vectorised :func:`segment_distance` over broadcastable ``(..., 3)`` arrays."""
    a0, a1, b0, b1 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (a0, a1, b0, b1))
    )
    d1, d2, r = a1 - a0, b1 - b0, a0 - b0
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    b = np.einsum("...i,...i->...", d1, d2)
    c = np.einsum("...i,...i->...", d1, r)
    f = np.einsum("...i,...i->...", d2, r)

    a_deg = a <= DEGENERATE_TOL
    e_deg = e <= DEGENERATE_TOL
    safe_a = np.where(a_deg, 1.0, a)
    safe_e = np.where(e_deg, 1.0, e)
    denom = a * e - b * b

    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > DEGENERATE_TOL, np.clip((b * f - c * e) / np.where(denom > DEGENERATE_TOL, denom, 1.0), 0, 1), 0.0)
        t = (b * s + f) / safe_e
        lo = t < 0.0
        hi = t > 1.0
        s = np.where(lo, np.clip(-c / safe_a, 0, 1), s)
        s = np.where(hi, np.clip((b - c) / safe_a, 0, 1), s)
        t = np.clip(t, 0.0, 1.0)

        # degenerate first segment: project its point onto the second
        s = np.where(a_deg, 0.0, s)
        t = np.where(a_deg & ~e_deg, np.clip(f / safe_e, 0, 1), t)
        # degenerate second segment
        t = np.where(e_deg, 0.0, t)
        s = np.where(e_deg & ~a_deg, np.clip(-c / safe_a, 0, 1), s)

    diff = (a0 + d1 * s[..., None]) - (b0 + d2 * t[..., None])
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def cuboid_contains(c: Cuboid, p: Sequence[float]) -> bool:
    return all(c.lo[i] <= p[i] <= c.hi[i] for i in range(3))


def cuboid_contains_many(c: Cuboid, pts: np.ndarray, strict: bool = False) -> np.ndarray:
    pts = np.asarray(pts, float)
    lo, hi = np.asarray(c.lo), np.asarray(c.hi)
    if strict:
        return np.all((pts > lo) & (pts < hi), axis=-1)
    return np.all((pts >= lo) & (pts <= hi), axis=-1)


def _box_sqdist_pieces(p0, d, lo, hi):
    # squared distance from p0 + t*d to the box is a sum of per-axis
    # piecewise quadratics; collect their breakpoints in (0, 1)
    knots = [0.0, 1.0]
    for i in range(3):
        if abs(d[i]) > DEGENERATE_TOL:
            for bound in (lo[i], hi[i]):
                t = (bound - p0[i]) / d[i]
                if 0.0 < t < 1.0:
                    knots.append(t)
    return sorted(knots)


def _point_box_sqdist(p, lo, hi) -> float:
    g = np.maximum(0.0, np.maximum(lo - p, p - hi))
    return float(g @ g)


def cuboid_segment_distance(c: Cuboid, s: Segment3) -> float:
    """Distance from a closed segment to a closed cuboid (0 iff they meet)."""
    p0 = np.asarray(s[0], float)
    d = np.asarray(s[1], float) - p0
    lo, hi = np.asarray(c.lo), np.asarray(c.hi)
    knots = _box_sqdist_pieces(p0, d, lo, hi)
    best = min(_point_box_sqdist(p0 + t * d, lo, hi) for t in knots)
    # on each knot interval the active terms are fixed, so the squared
    # distance is a single quadratic whose vertex we can clamp
    for t0, t1 in zip(knots[:-1], knots[1:]):
        mid = p0 + 0.5 * (t0 + t1) * d
        below = mid < lo
        above = mid > hi
        active = below | above
        if not active.any():
            return 0.0
        target = np.where(below, lo, hi)
        qa = float(d[active] @ d[active])
        if qa <= DEGENERATE_TOL:
            continue
        t = float(d[active] @ (target[active] - p0[active])) / qa
        t = min(max(t, t0), t1)
        best = min(best, _point_box_sqdist(p0 + t * d, lo, hi))
    return math.sqrt(best)


def box_box_distance_many(lo1, hi1, lo2, hi2) -> np.ndarray:
    """Distances between axis-aligned boxes; axis-parallel segments are boxes."""
    gap = np.maximum(0.0, np.maximum(np.asarray(lo2) - hi1, np.asarray(lo1) - hi2))
    return np.sqrt(np.einsum("...i,...i->...", gap, gap))


def clip_segment_to_box(p0, p1, lo, hi):
    """Parameter interval ``(t0, t1)`` of the segment inside the closed box, or None."""
    p0 = np.asarray(p0, float)
    d = np.asarray(p1, float) - p0
    t0, t1 = 0.0, 1.0
    for i in range(3):
        if abs(d[i]) <= DEGENERATE_TOL:
            if p0[i] < lo[i] or p0[i] > hi[i]:
                return None
            continue
        ta, tb = (lo[i] - p0[i]) / d[i], (hi[i] - p0[i]) / d[i]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def segment_crosses_interior(p0, p1, box: Cuboid) -> bool:
    """True if the segment meets the open interior of ``box``."""
    iv = clip_segment_to_box(p0, p1, box.lo, box.hi)
    if iv is None:
        return False
    p0 = np.asarray(p0, float)
    d = np.asarray(p1, float) - p0
    mid = p0 + 0.5 * (iv[0] + iv[1]) * d
    return bool(np.all((mid > np.asarray(box.lo)) & (mid < np.asarray(box.hi))))
