"""Single-kernel math: covariance factorization and support radii.

A kernel stores its position mu, per-axis log inverse scales
ln(s^-1) (so the scales s = exp(-log_inv_scale) stay positive under
unconstrained optimization), a rotation (angle or quaternion), and a
velocity weight.  The inverse covariance is R diag(s^-2) R^T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .geometry import rotation_matrix_2d, rotation_matrix_3d

#: Default clamp threshold.  exp(-4.5) puts the kernel cutoff at exactly
#: three standard deviations per axis: sqrt(-2 ln c) = 3.
DEFAULT_CLAMP = float(np.exp(-4.5))


@dataclass
class GaussianParticle:
    """One anisotropic kernel of the mixture."""

    position: np.ndarray
    log_inv_scale: np.ndarray
    rotation: np.ndarray  # shape () angle in 2D, shape (4,) quaternion in 3D
    weight: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.log_inv_scale = np.asarray(self.log_inv_scale, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.weight = np.asarray(self.weight, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.position.shape[0]

    @property
    def scales(self) -> np.ndarray:
        """Per-axis standard deviations s = exp(-log_inv_scale)."""
        return np.exp(-self.log_inv_scale)


def _check_finite(p: GaussianParticle) -> None:
    for name in ("position", "log_inv_scale", "rotation", "weight"):
        if not np.all(np.isfinite(getattr(p, name))):
            raise InvalidParameterError(f"non-finite {name}: {getattr(p, name)}")


def rotation_matrix(p: GaussianParticle) -> np.ndarray:
    if p.dim == 2:
        return rotation_matrix_2d(p.rotation.reshape(()))
    return rotation_matrix_3d(p.rotation)


def cov_inverse(p: GaussianParticle) -> np.ndarray:
    """Inverse covariance R diag(exp(2 * log_inv_scale)) R^T.

    Symmetric positive definite for any finite parameters.
    """
    _check_finite(p)
    r = rotation_matrix(p)
    inv_var = np.exp(2.0 * p.log_inv_scale)
    m = (r * inv_var) @ r.T
    return 0.5 * (m + m.T)  # exact symmetry regardless of rounding


def support_radius(p: GaussianParticle, clamp: float = DEFAULT_CLAMP) -> float:
    """Radius of the ball outside which the clamped kernel is zero.

    Conservative bound sqrt(-2 ln c) * max(s); exact along the major axis.
    """
    return float(np.sqrt(-2.0 * np.log(clamp)) * np.max(p.scales))


def kernel_value(p: GaussianParticle, x: np.ndarray) -> float:
    """Unclamped Gaussian value at x."""
    d = np.asarray(x, dtype=np.float64) - p.position
    return float(np.exp(-0.5 * d @ cov_inverse(p) @ d))
