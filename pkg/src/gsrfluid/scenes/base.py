"""Scene building blocks: analytic fields, boundary pieces, obstacles.

Boundary normals follow the inward convention: they point into the fluid,
i.e. into the domain box on its sides and away from an obstacle's interior
on its surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np

from ..geometry import Box


@dataclass
class AnalyticField:
    """Closed-form velocity field with its hand-derived spatial gradient.

    velocity maps (Q, d) -> (Q, d); gradient maps (Q, d) -> (Q, d, d) in
    the project-wide [k, l] = d u_l / d x_k layout.
    """

    velocity: Callable
    gradient: Callable

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.velocity(points)


# ----------------------------------------------------------- geometries

@dataclass(frozen=True)
class BoxSide:
    """One axis-aligned side of a box (segment in 2D, rectangle in 3D)."""

    box: Box
    axis: int
    at_upper: bool  # False: side at lo[axis], inward normal +e_axis

    def normal(self) -> np.ndarray:
        n = np.zeros(self.box.dim)
        n[self.axis] = -1.0 if self.at_upper else 1.0
        return n

    def sample(self, count: int, rng: np.random.Generator):
        pts = self.box.sample(count, rng)
        pts[:, self.axis] = self.box.hi[self.axis] if self.at_upper \
            else self.box.lo[self.axis]
        normals = np.tile(self.normal(), (count, 1))
        return pts, normals

    def scaled(self, k: float) -> "BoxSide":
        return BoxSide(self.box.scaled(k), self.axis, self.at_upper)


@dataclass(frozen=True)
class Segment:
    """2D line segment with an explicit fluid-side normal."""

    p0: np.ndarray
    p1: np.ndarray
    normal_dir: np.ndarray

    def sample(self, count: int, rng: np.random.Generator):
        p0 = np.asarray(self.p0, dtype=np.float64)
        p1 = np.asarray(self.p1, dtype=np.float64)
        u = rng.random(count)[:, None]
        pts = p0 + u * (p1 - p0)
        n = np.asarray(self.normal_dir, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return pts, np.tile(n, (count, 1))

    def scaled(self, k: float) -> "Segment":
        return Segment(np.asarray(self.p0) * k, np.asarray(self.p1) * k,
                       np.asarray(self.normal_dir))


@dataclass(frozen=True)
class Circle:
    """2D obstacle boundary; normals point away from the center (into fluid)."""

    center: np.ndarray
    radius: float

    def sample(self, count: int, rng: np.random.Generator):
        phi = rng.random(count) * (2.0 * np.pi)
        n = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        pts = np.asarray(self.center, dtype=np.float64) + self.radius * n
        return pts, n

    def scaled(self, k: float) -> "Circle":
        return Circle(np.asarray(self.center) * k, self.radius * k)


@dataclass(frozen=True)
class SphereSurface:
    """3D obstacle boundary; normals point away from the center."""

    center: np.ndarray
    radius: float

    def sample(self, count: int, rng: np.random.Generator):
        v = rng.standard_normal((count, 3))
        n = v / np.linalg.norm(v, axis=1, keepdims=True)
        pts = np.asarray(self.center, dtype=np.float64) + self.radius * n
        return pts, n

    def scaled(self, k: float) -> "SphereSurface":
        return SphereSurface(np.asarray(self.center) * k, self.radius * k)


@dataclass(frozen=True)
class MeshSurface:
    """Triangle-mesh boundary with per-face normals oriented into the fluid."""

    mesh: "TriangleMesh"  # noqa: F821 (scenes.mesh)

    def sample(self, count: int, rng: np.random.Generator):
        return self.mesh.sample_surface(count, rng)

    def scaled(self, k: float) -> "MeshSurface":
        return MeshSurface(self.mesh.scaled(k))


# ------------------------------------------------------------ obstacles

@dataclass(frozen=True)
class BallObstacle:
    """Solid disc (2D) or ball (3D) excluded from the fluid interior."""

    center: np.ndarray
    radius: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = points - np.asarray(self.center, dtype=np.float64)
        return np.sum(d * d, axis=1) < self.radius * self.radius

    def scaled(self, k: float) -> "BallObstacle":
        return BallObstacle(np.asarray(self.center) * k, self.radius * k)


@dataclass(frozen=True)
class MeshObstacle:
    mesh: "TriangleMesh"  # noqa: F821

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.mesh.contains(points)

    def scaled(self, k: float) -> "MeshObstacle":
        return MeshObstacle(self.mesh.scaled(k))


# -------------------------------------------------------------- pieces

VELOCITY = "velocity"      # type 1: u = u_b on the piece
NORMAL_FLUX = "normal_flux"  # type 2: u . n = f on the piece


@dataclass
class BoundaryPiece:
    """Geometry plus its condition.

    kind VELOCITY carries u_b mapping (M, d) -> (M, d); kind NORMAL_FLUX
    carries f mapping (M, d) -> (M,).
    """

    geometry: object
    kind: str
    target: Callable

    def scaled(self, k: float) -> "BoundaryPiece":
        inner = self.target
        if self.kind == VELOCITY:
            wrapped = lambda pts, _f=inner: k * _f(pts / k)  # noqa: E731
        else:
            wrapped = lambda pts, _f=inner: k * _f(pts / k)  # noqa: E731
        return BoundaryPiece(self.geometry.scaled(k), self.kind, wrapped)


def box_sides(box: Box) -> list:
    """All sides of a box, lo/hi per axis."""
    out = []
    for axis in range(box.dim):
        out.append(BoxSide(box, axis, False))
        out.append(BoxSide(box, axis, True))
    return out


def flux_condition(value: float) -> Callable:
    return lambda pts: np.full(len(pts), float(value))


def zero_velocity(pts: np.ndarray) -> np.ndarray:
    return np.zeros_like(pts)


# --------------------------------------------------------------- scenes

@dataclass
class KarmanSetup:
    """Dynamic-domain bookkeeping for the vortex-street scene.

    The working domain at time t is the base domain with the left edge
    moved to x_min + (t - T) * v0; initialization uses t = 0.  A persistent
    inflow condition sits at the base domain's own left edge.
    """

    inflow_speed: float
    base_domain: Box
    stage2_overrides: dict

    def scaled(self, k: float) -> "KarmanSetup":
        return KarmanSetup(self.inflow_speed * k, self.base_domain.scaled(k),
                           dict(self.stage2_overrides))

    def domain_at(self, t: float, total_time: float) -> Box:
        lo = self.base_domain.lo.copy()
        lo[0] = lo[0] + (t - total_time) * self.inflow_speed
        return Box(lo, self.base_domain.hi)


@dataclass
class SceneConfig:
    """Everything needed to set up and advance one experiment."""

    name: str
    dim: int
    domain: Box
    initial_field: AnalyticField
    boundaries: list
    obstacles: list = dataclass_field(default_factory=list)
    dt: float = 0.01
    frames: int = 100
    particle_target: int = 1024
    hyper_overrides: dict = dataclass_field(default_factory=dict)
    normalize: bool = True
    karman: Optional[KarmanSetup] = None
    scale_factor: float = 1.0  # set by normalization

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
