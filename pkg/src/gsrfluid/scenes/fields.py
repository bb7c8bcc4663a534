"""Closed-form initial velocity fields and their hand-derived gradients.

Gradient layout: out[q, k, l] = d u_l / d x_k.  Each builder returns an
AnalyticField; constants live in the catalogue, not here.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .base import AnalyticField

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def uniform_flow(velocity) -> AnalyticField:
    v0 = np.asarray(velocity, dtype=np.float64)
    d = v0.shape[0]

    def vel(pts):
        return np.tile(v0, (len(pts), 1))

    def grad(pts):
        return np.zeros((len(pts), d, d))

    return AnalyticField(vel, grad)


def taylor_green() -> AnalyticField:
    """u = (sin x cos y, -cos x sin y); exactly divergence-free."""

    def vel(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)], axis=1)

    def grad(pts):
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = np.cos(x) * np.cos(y)
        out[:, 1, 0] = -np.sin(x) * np.sin(y)
        out[:, 0, 1] = np.sin(x) * np.sin(y)
        out[:, 1, 1] = -np.cos(x) * np.cos(y)
        return out

    return AnalyticField(vel, grad)


def gaussian_vortex_pair(centers, strength: float, core: float) -> AnalyticField:
    """Two co-rotating Gaussian vortices (the Taylor-vortex initial field).

    Per vortex at z: u = (U/a) exp(0.5 (1 - r^2/a^2)) * (z_y - y, x - z_x).
    """
    centers = np.asarray(centers, dtype=np.float64)
    u0, a = float(strength), float(core)

    def _phi(pts, z):
        d = pts - z
        r2 = np.sum(d * d, axis=1)
        return (u0 / a) * np.exp(0.5 * (1.0 - r2 / (a * a))), d

    def vel(pts):
        out = np.zeros_like(pts)
        for z in centers:
            phi, d = _phi(pts, z)
            out[:, 0] += phi * (-d[:, 1])
            out[:, 1] += phi * d[:, 0]
        return out

    def grad(pts):
        out = np.zeros((len(pts), 2, 2))
        a2 = a * a
        for z in centers:
            phi, d = _phi(pts, z)
            dx, dy = d[:, 0], d[:, 1]
            out[:, 0, 0] += phi * dx * dy / a2
            out[:, 1, 0] += phi * dy * dy / a2 - phi
            out[:, 0, 1] += phi - phi * dx * dx / a2
            out[:, 1, 1] += -phi * dx * dy / a2
        return out

    return AnalyticField(vel, grad)


def vortex_blob_sum(centers, strengths, core: float,
                    eps: float = 1e-6) -> AnalyticField:
    """Sum of smoothed 2D vortices (the leapfrog initial field).

    Per vortex: u = U (1 - exp(-((r+eps)/a)^2)) / (r+eps)^2 * (z_y - y, x - z_x).
    """
    centers = np.asarray(centers, dtype=np.float64)
    strengths = np.asarray(strengths, dtype=np.float64)
    a = float(core)

    def _parts(pts, z):
        d = pts - z
        r = np.sqrt(np.sum(d * d, axis=1))
        rho = r + eps
        q = (rho / a) ** 2
        one_minus = -np.expm1(-q)  # 1 - exp(-q) without cancellation
        return d, r, rho, q, one_minus

    def vel(pts):
        out = np.zeros_like(pts)
        for z, u0 in zip(centers, strengths):
            d, r, rho, q, om = _parts(pts, z)
            f = u0 * om / (rho * rho)
            out[:, 0] += f * (-d[:, 1])
            out[:, 1] += f * d[:, 0]
        return out

    def grad(pts):
        out = np.zeros((len(pts), 2, 2))
        for z, u0 in zip(centers, strengths):
            d, r, rho, q, om = _parts(pts, z)
            f = u0 * om / (rho * rho)
            # dF/drho = 2 U (q e^{-q} - (1 - e^{-q})) / rho^3
            fp = 2.0 * u0 * (q * np.exp(-q) - om) / (rho ** 3)
            rinv = np.where(r > 1e-30, 1.0 / np.maximum(r, 1e-30), 0.0)
            wx, wy = -d[:, 1], d[:, 0]
            cx = fp * d[:, 0] * rinv
            cy = fp * d[:, 1] * rinv
            out[:, 0, 0] += cx * wx
            out[:, 0, 1] += cx * wy + f
            out[:, 1, 0] += cy * wx - f
            out[:, 1, 1] += cy * wy
        return out

    return AnalyticField(vel, grad)


def point_vortex_sum(centers, strengths, eps: float = 0.1) -> AnalyticField:
    """Regularized point vortices: u = U (y - z_y, z_x - x) / (r^2 + eps)."""
    centers = np.asarray(centers, dtype=np.float64)
    strengths = np.asarray(strengths, dtype=np.float64)

    def vel(pts):
        out = np.zeros_like(pts)
        for z, u0 in zip(centers, strengths):
            d = pts - z
            f = u0 / (np.sum(d * d, axis=1) + eps)
            out[:, 0] += f * d[:, 1]
            out[:, 1] += f * (-d[:, 0])
        return out

    def grad(pts):
        out = np.zeros((len(pts), 2, 2))
        for z, u0 in zip(centers, strengths):
            d = pts - z
            denom = np.sum(d * d, axis=1) + eps
            f = u0 / denom
            df = -2.0 * u0 / (denom * denom)
            wx, wy = d[:, 1], -d[:, 0]
            out[:, 0, 0] += df * d[:, 0] * wx
            out[:, 0, 1] += df * d[:, 0] * wy - f
            out[:, 1, 0] += df * d[:, 1] * wx + f
            out[:, 1, 1] += df * d[:, 1] * wy
        return out

    return AnalyticField(vel, grad)


# --------------------------------------------------------- vortex rings

RING_SEGMENTS = 64


def _gaussian_core(rho: np.ndarray, a: float):
    """Velocity kernel of a Gaussian vorticity core of width a.

    K(rho) = [erf(rho / (sqrt2 a)) - sqrt(2/pi) (rho/a) e^{-rho^2/(2a^2)}] / rho^3,
    with its derivative.  Series expansions keep small rho accurate.
    """
    rho = np.asarray(rho)
    t = (rho / a) ** 2
    small = rho < 0.01 * a
    safe = np.where(small, a, rho)
    q = erf(safe / (np.sqrt(2.0) * a)) \
        - SQRT_2_OVER_PI * (safe / a) * np.exp(-0.5 * (safe / a) ** 2)
    kernel = q / safe ** 3
    dkernel = SQRT_2_OVER_PI * np.exp(-0.5 * (safe / a) ** 2) / (a ** 3 * safe) \
        - 3.0 * kernel / safe
    c = SQRT_2_OVER_PI / a ** 3
    kernel_s = c * (1.0 / 3.0 - t / 10.0 + t * t / 56.0)
    dkernel_s = SQRT_2_OVER_PI * (rho / a ** 5) * (-0.2 + t / 14.0 - t * t / 72.0)
    return np.where(small, kernel_s, kernel), np.where(small, dkernel_s, dkernel)


def _ring_segments(center, normal, radius):
    z = np.asarray(center, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    # robust orthonormal frame around n
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    phi = (np.arange(RING_SEGMENTS) + 0.5) * (2.0 * np.pi / RING_SEGMENTS)
    pts = z + radius * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    tangents = radius * (-np.sin(phi)[:, None] * e1 + np.cos(phi)[:, None] * e2) \
        * (2.0 * np.pi / RING_SEGMENTS)
    return pts, tangents


def vortex_rings(rings) -> AnalyticField:
    """Sum of circular vortex filaments with Gaussian-smoothed cores.

    rings: iterable of (center, normal, radius, core, strength).  Velocity
    is the regularized Biot-Savart integral over RING_SEGMENTS midpoint
    segments; a ring self-propels along +normal.
    """
    segs = []
    for center, normal, radius, core, strength in rings:
        pts, tangents = _ring_segments(center, normal, radius)
        segs.append((pts, tangents, float(core),
                     float(strength) / (4.0 * np.pi)))

    def vel(points):
        out = np.zeros_like(points)
        for pts, tangents, a, gamma in segs:
            for p, dl in zip(pts, tangents):
                rho_v = points - p
                rho = np.linalg.norm(rho_v, axis=1)
                k, _ = _gaussian_core(rho, a)
                out += gamma * np.cross(dl, rho_v) * k[:, None]
        return out

    def grad(points):
        out = np.zeros((len(points), 3, 3))
        eye = np.eye(3)
        for pts, tangents, a, gamma in segs:
            for p, dl in zip(pts, tangents):
                rho_v = points - p
                rho = np.linalg.norm(rho_v, axis=1)
                k, dk = _gaussian_core(rho, a)
                cross = np.cross(dl, rho_v)
                rinv = 1.0 / np.maximum(rho, 1e-300)
                for kk in range(3):
                    dl_x_ek = np.cross(dl, eye[kk])
                    out[:, kk, :] += gamma * (dl_x_ek[None, :] * k[:, None]
                                              + cross * (dk * rho_v[:, kk]
                                                         * rinv)[:, None])
        return out

    return AnalyticField(vel, grad)
