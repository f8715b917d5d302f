"""Continuous problem description: region, obstacles, zones and services."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Cuboid, Point3, cuboid_contains

AXES = "XYZ"


class ScenarioError(ValueError):
    """The scenario violates one of its structural invariants."""


class InfeasibleScenarioError(ScenarioError):
    """Some terminal pair cannot be connected in the routing graph."""


@dataclass(frozen=True)
class Service:
    """One pipeline to route.

    ``alpha`` holds the seven cost weights; the random cost model only reads
    ``alpha[0]``.  ``source_axis``/``destination_axis`` select which virtual
    node of the terminal the path starts/ends on (None: inferred).
    """

    id: int
    source: Point3
    destination: Point3
    radius: float
    safety: float = 0.0
    elbow_min: float = 0.0
    alpha: tuple = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    source_axis: Optional[str] = None
    destination_axis: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "source", Point3(*map(float, self.source)))
        object.__setattr__(self, "destination", Point3(*map(float, self.destination)))
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 7:
            raise ScenarioError(f"service {self.id}: alpha needs 7 entries, got {len(alpha)}")
        object.__setattr__(self, "alpha", alpha)
        if not self.radius > 0:
            raise ScenarioError(f"service {self.id}: radius must be positive")
        if self.safety < 0 or self.elbow_min < 0:
            raise ScenarioError(f"service {self.id}: safety and elbow_min must be >= 0")
        if not alpha[0] + alpha[4] > 0:
            raise ScenarioError(f"service {self.id}: alpha1 + alpha5 must be positive")
        for ax in (self.source_axis, self.destination_axis):
            if ax is not None and ax not in AXES:
                raise ScenarioError(f"service {self.id}: bad terminal axis {ax!r}")
        if self.source == self.destination:
            raise ScenarioError(f"service {self.id}: source equals destination")

    @property
    def clearance(self) -> float:
        """Obstacle clearance ``R + Delta`` (also the covering radius)."""
        return self.radius + self.safety


def pair_clearance(a: Service, b: Service) -> float:
    """Minimum allowed distance between two services' arcs."""
    return a.radius + b.radius + max(a.safety, b.safety)


@dataclass
class Scenario:
    region: Cuboid
    services: list
    spacing: float
    obstacles: list = field(default_factory=list)
    penetrable_zones: list = field(default_factory=list)
    preference_zones: list = field(default_factory=list)
    cost_model: str = "case_study"
    # Cl proximity radius; None means twice the grid spacing
    proximity_radius: Optional[float] = None
    name: str = ""

    @property
    def ceiling(self) -> float:
        return self.region.hi[2]

    @property
    def rho(self) -> float:
        return 2.0 * self.spacing if self.proximity_radius is None else self.proximity_radius

    def service(self, k: int) -> Service:
        for s in self.services:
            if s.id == k:
                return s
        raise KeyError(k)

    def in_obstacle_interior(self, p) -> bool:
        """True if ``p`` is strictly inside an obstacle and not in a hole."""
        for ob in self.obstacles:
            if all(ob.lo[i] < p[i] < ob.hi[i] for i in range(3)):
                if not any(cuboid_contains(z, p) for z in self.penetrable_zones):
                    return True
        return False

    def validate(self) -> None:
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ScenarioError("grid spacing must be positive")
        if self.cost_model not in ("case_study", "random"):
            raise ScenarioError(f"unknown cost model {self.cost_model!r}")
        for group in ("obstacles", "penetrable_zones", "preference_zones"):
            for i, c in enumerate(getattr(self, group)):
                if not self.region.contains_cuboid(c):
                    raise ScenarioError(f"{group}[{i}] lies outside the region")
        ids = [s.id for s in self.services]
        if len(set(ids)) != len(ids):
            raise ScenarioError("service ids must be unique")
        for s in self.services:
            for name in ("source", "destination"):
                p = getattr(s, name)
                if not cuboid_contains(self.region, p):
                    raise ScenarioError(f"service {s.id}: {name} {tuple(p)} outside region")
                if self.in_obstacle_interior(p):
                    raise ScenarioError(f"service {s.id}: {name} {tuple(p)} inside an obstacle")
