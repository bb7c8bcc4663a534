"""Rotation parametrizations and axis-aligned boxes.

Rotations are an angle theta in 2D and a quaternion (w, x, y, z) in 3D.
Quaternions are normalized inside the forward map, so analytic derivatives
carry the normalization Jacobian and finite differences of raw components
agree with them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi]^d."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box corners must be matching 1-d vectors")
        if not np.all(self.hi > self.lo):
            raise ValueError("degenerate box")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.sides))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((count, self.dim))
        return self.lo + u * self.sides

    def scaled(self, k: float) -> "Box":
        return Box(self.lo * k, self.hi * k)


def rotation_matrix_2d(theta: np.ndarray) -> np.ndarray:
    """Rotation matrices, shape (..., 2, 2)."""
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norms = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / norms


def rotation_matrix_3d(quat: np.ndarray) -> np.ndarray:
    """Rotation matrices from (w, x, y, z) quaternions, shape (..., 3, 3).

    Input quaternions are normalized first; arbitrary nonzero quaternions
    are valid inputs.
    """
    q = normalize_quaternions(quat)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[..., 0, 1] = 2.0 * (x * y - w * z)
    out[..., 0, 2] = 2.0 * (x * z + w * y)
    out[..., 1, 0] = 2.0 * (x * y + w * z)
    out[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[..., 1, 2] = 2.0 * (y * z - w * x)
    out[..., 2, 0] = 2.0 * (x * z - w * y)
    out[..., 2, 1] = 2.0 * (y * z + w * x)
    out[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return out


def _rotation_jacobian_unit(q: np.ndarray) -> np.ndarray:
    """dR/dq_a for unit quaternions, shape (..., 4, 3, 3)."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    zero = np.zeros_like(w)
    d = np.empty(q.shape[:-1] + (4, 3, 3))
    # dR/dw
    d[..., 0, 0, 0], d[..., 0, 0, 1], d[..., 0, 0, 2] = zero, -z, y
    d[..., 0, 1, 0], d[..., 0, 1, 1], d[..., 0, 1, 2] = z, zero, -x
    d[..., 0, 2, 0], d[..., 0, 2, 1], d[..., 0, 2, 2] = -y, x, zero
    # dR/dx
    d[..., 1, 0, 0], d[..., 1, 0, 1], d[..., 1, 0, 2] = zero, y, z
    d[..., 1, 1, 0], d[..., 1, 1, 1], d[..., 1, 1, 2] = y, -2.0 * x, -w
    d[..., 1, 2, 0], d[..., 1, 2, 1], d[..., 1, 2, 2] = z, w, -2.0 * x
    # dR/dy
    d[..., 2, 0, 0], d[..., 2, 0, 1], d[..., 2, 0, 2] = -2.0 * y, x, w
    d[..., 2, 1, 0], d[..., 2, 1, 1], d[..., 2, 1, 2] = x, zero, z
    d[..., 2, 2, 0], d[..., 2, 2, 1], d[..., 2, 2, 2] = -w, z, -2.0 * y
    # dR/dz
    d[..., 3, 0, 0], d[..., 3, 0, 1], d[..., 3, 0, 2] = -2.0 * z, -w, x
    d[..., 3, 1, 0], d[..., 3, 1, 1], d[..., 3, 1, 2] = w, -2.0 * z, y
    d[..., 3, 2, 0], d[..., 3, 2, 1], d[..., 3, 2, 2] = x, y, zero
    return 2.0 * d


def rotation_jacobian_3d(quat: np.ndarray) -> np.ndarray:
    """dR/dr_b for raw quaternions r, shape (..., 4, 3, 3).

    Chains the unit-quaternion Jacobian through q = r / |r| so that the
    result is the true derivative of rotation_matrix_3d w.r.t. the stored
    components.
    """
    r = np.asarray(quat, dtype=np.float64)
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    q = r / norms
    dRdq = _rotation_jacobian_unit(q)  # (..., 4a, 3, 3)
    # dq_a/dr_b = (delta_ab - q_a q_b) / |r|
    eye = np.eye(4)
    dqdr = (eye - q[..., :, None] * q[..., None, :]) / norms[..., None]
    return np.einsum("...aij,...ab->...bij", dRdq, dqdr)
