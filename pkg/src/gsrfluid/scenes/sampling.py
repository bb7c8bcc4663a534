"""Batch sampling for the optimization loops.

A SceneSampler owns a (normalized) scene and knows how to draw interior
and boundary samples for any frame, including the vortex-street dynamic
domain.  All draws consume a caller-provided Generator, so reproducibility
is the caller's choice of stream.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Box
from ..losses import SampleBatch
from .base import (NORMAL_FLUX, VELOCITY, BoundaryPiece, SceneConfig,
                   Segment, box_sides, flux_condition)


def sample_boundary(piece: BoundaryPiece, count: int,
                    rng: np.random.Generator):
    """Uniform points on the piece plus unit normals (by length/area)."""
    return piece.geometry.sample(count, rng)


def sample_interior(box: Box, obstacles, count: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the box, rejecting obstacle interiors."""
    if not obstacles:
        return box.sample(count, rng)
    chunks = []
    need = count
    while need > 0:
        pts = box.sample(max(2 * need, 64), rng)
        keep = np.ones(len(pts), dtype=bool)
        for ob in obstacles:
            keep &= ~ob.contains(pts)
        pts = pts[keep][:need]
        chunks.append(pts)
        need -= len(pts)
    return np.concatenate(chunks, axis=0)


class SceneSampler:
    """Draws SampleBatches for a scene at a given simulation time."""

    def __init__(self, scene: SceneConfig, total_frames: int = None):
        self.scene = scene
        frames = total_frames if total_frames is not None else scene.frames
        self.total_time = frames * scene.dt

    # ------------------------------------------------------------ domains

    def domain_at(self, t: float) -> Box:
        if self.scene.karman is not None:
            return self.scene.karman.domain_at(t, self.total_time)
        return self.scene.domain

    def init_domain(self) -> Box:
        """Domain used for layout and initialization (t = 0)."""
        return self.domain_at(0.0)

    def boundary_pieces(self, t: float):
        if self.scene.karman is None:
            return self.scene.boundaries
        km = self.scene.karman
        dom = self.domain_at(t)
        v0 = km.inflow_speed
        pieces = [
            BoundaryPiece(_side(dom, 0, False), NORMAL_FLUX, flux_condition(v0)),
            BoundaryPiece(_side(dom, 0, True), NORMAL_FLUX, flux_condition(-v0)),
            BoundaryPiece(_side(dom, 1, False), NORMAL_FLUX, flux_condition(0.0)),
            BoundaryPiece(_side(dom, 1, True), NORMAL_FLUX, flux_condition(0.0)),
        ]
        base = km.base_domain
        inflow = Segment(np.array([base.lo[0], base.lo[1]]),
                         np.array([base.lo[0], base.hi[1]]),
                         np.array([1.0, 0.0]))
        pieces.append(BoundaryPiece(inflow, NORMAL_FLUX, flux_condition(v0)))
        # obstacle pieces (the cylinder) are kept from the static scene list
        for piece in self.scene.boundaries:
            if piece.kind == VELOCITY or _is_obstacle_piece(piece):
                pieces.append(piece)
        return pieces

    # ------------------------------------------------------------ batches

    def sample_interior(self, count: int, rng: np.random.Generator,
                        t: float = 0.0) -> np.ndarray:
        return sample_interior(self.domain_at(t), self.scene.obstacles,
                               count, rng)

    def sample_batch(self, hyper, rng: np.random.Generator, t: float,
                     interior_only: bool = False,
                     interior_box: Box = None) -> SampleBatch:
        box = interior_box if interior_box is not None else self.domain_at(t)
        interior = sample_interior(box, self.scene.obstacles,
                                   hyper.q_interior, rng)
        if interior_only:
            return SampleBatch(interior=interior)
        b1_pts, b1_tgt = [], []
        b2_pts, b2_nrm, b2_tgt = [], [], []
        for piece in self.boundary_pieces(t):
            pts, normals = sample_boundary(piece, hyper.q_boundary, rng)
            if piece.kind == VELOCITY:
                b1_pts.append(pts)
                b1_tgt.append(piece.target(pts))
            else:
                b2_pts.append(pts)
                b2_nrm.append(normals)
                b2_tgt.append(piece.target(pts))
        batch = SampleBatch(interior=interior)
        if b1_pts:
            batch.b1_points = np.concatenate(b1_pts)
            batch.b1_targets = np.concatenate(b1_tgt)
        if b2_pts:
            batch.b2_points = np.concatenate(b2_pts)
            batch.b2_normals = np.concatenate(b2_nrm)
            batch.b2_targets = np.concatenate(b2_tgt)
        return batch

    def init_batch(self, hyper, rng: np.random.Generator) -> SampleBatch:
        """Interior-only batch over the initialization domain."""
        return self.sample_batch(hyper, rng, 0.0, interior_only=True,
                                 interior_box=self.init_domain())


def _side(box: Box, axis: int, upper: bool):
    from .base import BoxSide
    return BoxSide(box, axis, upper)


def _is_obstacle_piece(piece: BoundaryPiece) -> bool:
    from .base import Circle, MeshSurface, SphereSurface
    return isinstance(piece.geometry, (Circle, SphereSurface, MeshSurface))
