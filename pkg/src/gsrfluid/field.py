"""Clamped Gaussian mixture velocity fields.

The field is v(x) = sum_i v_i * (G_i(x) - c) over kernels with G_i(x) >= c,
where G_i is an anisotropic Gaussian and c the clamp threshold.  Each kernel
is zero outside a ball of radius sqrt(-2 ln c) * max(s_i), which a spatial
hash exploits: kernels are registered in every grid cell their support ball
overlaps, so a point query reads a single bucket.

All heavy math is vectorized over (sample, kernel) pairs.  Reductions use
np.bincount, which accumulates in input order, so results are bit-stable
run to run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError
from .geometry import rotation_matrix_2d, rotation_matrix_3d, rotation_jacobian_3d
from .particles import DEFAULT_CLAMP, GaussianParticle


@dataclass
class SpatialHash:
    """Uniform grid over integer cells of side cell_length.

    keys are flattened cell coordinates relative to cmin; entries hold
    particle indices sorted by key (CSR layout).  Every particle appears in
    exactly the cells its support ball overlaps.
    """

    cell_length: float
    cmin: np.ndarray  # (d,) int64
    cdims: np.ndarray  # (d,) int64
    keys: np.ndarray  # (n_buckets,) sorted unique int64
    bucket_start: np.ndarray
    bucket_end: np.ndarray
    entries: np.ndarray  # particle indices grouped by bucket

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        return np.floor(points / self.cell_length).astype(np.int64)

    def flat_keys(self, cells: np.ndarray) -> np.ndarray:
        """Flattened keys; -1 for cells outside the covered range."""
        rel = cells - self.cmin
        inside = np.all((rel >= 0) & (rel < self.cdims), axis=1)
        key = np.zeros(cells.shape[0], dtype=np.int64)
        for k in range(cells.shape[1]):
            key = key * self.cdims[k] + rel[:, k]
        key[~inside] = -1
        return key


def _build_hash(positions: np.ndarray, radii: np.ndarray) -> Optional[SpatialHash]:
    n, d = positions.shape
    if n == 0:
        return None
    cell = float(np.max(radii))
    if not np.isfinite(cell) or cell <= 0.0:
        raise InvalidParameterError("support radii must be positive and finite")
    lo = np.floor((positions - radii[:, None]) / cell).astype(np.int64)
    hi = np.floor((positions + radii[:, None]) / cell).astype(np.int64)
    spans = hi - lo + 1

    key_parts = []
    idx_parts = []
    cmin = lo.min(axis=0)
    cmax = hi.max(axis=0)
    cdims = cmax - cmin + 1
    r2 = radii * radii
    # Enumerate candidate cells per particle (spans are tiny, <= 3 per axis),
    # keeping only cells whose box actually intersects the support ball.
    for offs in np.ndindex(*spans.max(axis=0)):
        offs = np.asarray(offs, dtype=np.int64)
        mask = np.all(offs < spans, axis=1)
        if not np.any(mask):
            continue
        cells = lo[mask] + offs
        box_lo = cells * cell
        nearest = np.clip(positions[mask], box_lo, box_lo + cell)
        dist2 = np.sum((positions[mask] - nearest) ** 2, axis=1)
        hit = dist2 <= r2[mask]
        if not np.any(hit):
            continue
        sel = np.flatnonzero(mask)[hit]
        rel = cells[hit] - cmin
        key = np.zeros(len(sel), dtype=np.int64)
        for k in range(d):
            key = key * cdims[k] + rel[:, k]
        key_parts.append(key)
        idx_parts.append(sel)

    all_keys = np.concatenate(key_parts)
    all_idx = np.concatenate(idx_parts).astype(np.int64)
    order = np.argsort(all_keys, kind="stable")
    sorted_keys = all_keys[order]
    entries = all_idx[order]
    uniq, start = np.unique(sorted_keys, return_index=True)
    end = np.append(start[1:], len(sorted_keys))
    return SpatialHash(cell, cmin, cdims, uniq, start, end, entries)


@dataclass
class PairCache:
    """Per-(sample, kernel) quantities for one batch of query points.

    Only active pairs (G >= c) are kept.  delta = x - mu, w = R^T delta,
    mdelta = Sigma^-1 delta, g the unclamped Gaussian value.
    """

    n_samples: int
    s_idx: np.ndarray
    p_idx: np.ndarray
    g: np.ndarray
    delta: np.ndarray
    w: np.ndarray
    mdelta: np.ndarray
    e2a: np.ndarray  # exp(2 * log_inv_scale) gathered per pair
    v: np.ndarray  # weights gathered per pair
    rot: np.ndarray  # rotation matrices gathered per pair


class GsrField:
    """Particle set + clamp threshold + spatial hash.

    Parameters are stored as arrays: positions (N, d), log inverse scales
    (N, d), rotations (N,) in 2D or (N, 4) in 3D, weights (N, d).  Mutating
    them requires exclusive access and a rebuild_hash() afterwards;
    evaluation is pure and read-only.
    """

    def __init__(self, dim, positions, log_inv_scale, rotations, weights,
                 clamp: float = DEFAULT_CLAMP):
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not 0.0 < clamp < 1.0:
            raise ValueError("clamp threshold must lie in (0, 1)")
        self.dim = int(dim)
        self.clamp = float(clamp)
        self.positions = np.array(positions, dtype=np.float64).reshape(-1, dim)
        self.log_inv_scale = np.array(log_inv_scale, dtype=np.float64).reshape(-1, dim)
        rot_shape = (-1,) if dim == 2 else (-1, 4)
        self.rotations = np.array(rotations, dtype=np.float64).reshape(*rot_shape)
        self.weights = np.array(weights, dtype=np.float64).reshape(-1, dim)
        if not (len(self.positions) == len(self.log_inv_scale)
                == len(self.rotations) == len(self.weights)):
            raise ValueError("parameter arrays disagree on particle count")
        self.hash: Optional[SpatialHash] = None
        self._derived = None
        self.rebuild_hash()

    # ------------------------------------------------------------- basics

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def rotation_size(self) -> int:
        return 1 if self.dim == 2 else 4

    def particle(self, i: int) -> GaussianParticle:
        return GaussianParticle(self.positions[i].copy(),
                                self.log_inv_scale[i].copy(),
                                np.array(self.rotations[i]),
                                self.weights[i].copy())

    def copy(self) -> "GsrField":
        return GsrField(self.dim, self.positions, self.log_inv_scale,
                        self.rotations, self.weights, self.clamp)

    @classmethod
    def empty(cls, dim: int, clamp: float = DEFAULT_CLAMP) -> "GsrField":
        rot = np.zeros((0,)) if dim == 2 else np.zeros((0, 4))
        return cls(dim, np.zeros((0, dim)), np.zeros((0, dim)), rot,
                   np.zeros((0, dim)), clamp)

    # ------------------------------------------------- derived quantities

    def _refresh(self):
        for name, arr in (("positions", self.positions),
                          ("log_inv_scale", self.log_inv_scale),
                          ("rotations", self.rotations),
                          ("weights", self.weights)):
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"non-finite entries in {name}")
        scales = np.exp(-self.log_inv_scale)
        e2a = np.exp(2.0 * self.log_inv_scale)
        if self.dim == 2:
            rot = rotation_matrix_2d(self.rotations)
            drot = None
        else:
            rot = rotation_matrix_3d(self.rotations)
            drot = None  # built lazily; only loss backward needs it
        radii = np.sqrt(-2.0 * np.log(self.clamp)) * scales.max(axis=1, initial=0.0)
        self._derived = {"scales": scales, "e2a": e2a, "rot": rot,
                         "drot": drot, "radii": radii}

    def rebuild_hash(self) -> "GsrField":
        """Restore hash + cached derived quantities after mutating parameters."""
        self._refresh()
        self.hash = _build_hash(self.positions, self._derived["radii"]) \
            if self.n else None
        return self

    @property
    def scales(self) -> np.ndarray:
        return self._derived["scales"]

    @property
    def support_radii(self) -> np.ndarray:
        return self._derived["radii"]

    @property
    def rotation_matrices(self) -> np.ndarray:
        return self._derived["rot"]

    def _rotation_jacobians(self) -> np.ndarray:
        if self._derived["drot"] is None:
            self._derived["drot"] = rotation_jacobian_3d(self.rotations)
        return self._derived["drot"]

    def validate(self) -> None:
        """Raise InvalidParameterError if any particle invariant is broken."""
        self._refresh()
        if self.dim == 3 and self.n:
            norms = np.linalg.norm(self.rotations, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise InvalidParameterError("quaternions drifted off the unit sphere")

    # ------------------------------------------------------------ queries

    def query_candidates(self, points: np.ndarray):
        """Hash bucket lookup: candidate pairs (sample, particle), unfiltered."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        q = pts.shape[0]
        if self.hash is None or q == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64), q
        h = self.hash
        key = h.flat_keys(h.cell_of(pts))
        slot = np.searchsorted(h.keys, key)
        slot = np.clip(slot, 0, len(h.keys) - 1)
        found = (key >= 0) & (h.keys[slot] == key)
        start = np.where(found, h.bucket_start[slot], 0)
        end = np.where(found, h.bucket_end[slot], 0)
        counts = end - start
        total = int(counts.sum())
        if total == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64), q
        s_idx = np.repeat(np.arange(q, dtype=np.int64), counts)
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
        flat = np.arange(total, dtype=np.int64) \
            - np.repeat(offsets, counts) + np.repeat(start, counts)
        return s_idx, h.entries[flat], q

    def pair_cache(self, points: np.ndarray) -> PairCache:
        """Active (G >= c) pairs and their per-pair forward quantities."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        s_idx, p_idx, q = self.query_candidates(pts)
        der = self._derived
        delta = pts[s_idx] - self.positions[p_idx]
        rot = der["rot"][p_idx]
        w = np.einsum("pi,pij->pj", delta, rot)
        e2a = der["e2a"][p_idx]
        g = np.exp(-0.5 * np.sum(e2a * w * w, axis=1))
        active = g >= self.clamp
        s_idx, p_idx = s_idx[active], p_idx[active]
        delta, rot, w, e2a, g = (delta[active], rot[active], w[active],
                                 e2a[active], g[active])
        mdelta = np.einsum("pij,pj->pi", rot, e2a * w)
        return PairCache(q, s_idx, p_idx, g, delta, w, mdelta, e2a,
                         self.weights[p_idx], rot)

    def neighbors(self, x: np.ndarray) -> np.ndarray:
        """Indices i with G_i(x) >= c, ascending."""
        cache = self.pair_cache(np.asarray(x, dtype=np.float64)[None, :])
        return np.sort(cache.p_idx)

    # ------------------------------------------------------------ forward

    def evaluate_points(self, points: np.ndarray,
                        cache: Optional[PairCache] = None) -> np.ndarray:
        """Field values at points, shape (Q, d).  Exactly zero off-support."""
        c = cache if cache is not None else self.pair_cache(points)
        out = np.zeros((c.n_samples, self.dim))
        gm = c.g - self.clamp
        for l in range(self.dim):
            out[:, l] = np.bincount(c.s_idx, weights=c.v[:, l] * gm,
                                    minlength=c.n_samples)
        return out

    def gradient_points(self, points: np.ndarray,
                        cache: Optional[PairCache] = None) -> np.ndarray:
        """Spatial gradients, shape (Q, d, d) with [k, l] = d v_l / d x_k."""
        c = cache if cache is not None else self.pair_cache(points)
        out = np.zeros((c.n_samples, self.dim, self.dim))
        for k in range(self.dim):
            gk = -c.g * c.mdelta[:, k]
            for l in range(self.dim):
                out[:, k, l] = np.bincount(c.s_idx, weights=gk * c.v[:, l],
                                           minlength=c.n_samples)
        return out

    def divergence_points(self, points: np.ndarray,
                          cache: Optional[PairCache] = None) -> np.ndarray:
        c = cache if cache is not None else self.pair_cache(points)
        contrib = -c.g * np.sum(c.mdelta * c.v, axis=1)
        return np.bincount(c.s_idx, weights=contrib, minlength=c.n_samples)

    def curl_points(self, points: np.ndarray,
                    cache: Optional[PairCache] = None) -> np.ndarray:
        """Curl: shape (Q,) in 2D, (Q, 3) in 3D."""
        c = cache if cache is not None else self.pair_cache(points)
        if self.dim == 2:
            contrib = -c.g * (c.mdelta[:, 0] * c.v[:, 1]
                              - c.mdelta[:, 1] * c.v[:, 0])
            return np.bincount(c.s_idx, weights=contrib, minlength=c.n_samples)
        cx = np.cross(c.mdelta, c.v)
        out = np.zeros((c.n_samples, 3))
        for l in range(3):
            out[:, l] = np.bincount(c.s_idx, weights=-c.g * cx[:, l],
                                    minlength=c.n_samples)
        return out

    # single-point conveniences --------------------------------------------

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate_points(np.asarray(x, dtype=np.float64)[None, :])[0]

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.gradient_points(np.asarray(x, dtype=np.float64)[None, :])[0]

    def divergence(self, x: np.ndarray) -> float:
        return float(self.divergence_points(np.asarray(x, dtype=np.float64)[None, :])[0])

    def curl(self, x: np.ndarray):
        out = self.curl_points(np.asarray(x, dtype=np.float64)[None, :])
        return float(out[0]) if self.dim == 2 else out[0]

    # ----------------------------------------------------------- backward

    def backward(self, cache: PairCache,
                 sigma: Optional[np.ndarray] = None,
                 cot_grad: Optional[np.ndarray] = None):
        """Accumulate d(loss)/d(params) from per-sample cotangents.

        sigma is dL/dv(x_j) with shape (Q, d); cot_grad is dL/d(grad v)(x_j)
        with shape (Q, d, d) in the [k, l] = d v_l / d x_k layout.  Either
        may be None.  Returns (d_pos, d_scale, d_rot, d_weight) arrays.
        """
        n, d = self.n, self.dim
        d_pos = np.zeros((n, d))
        d_scale = np.zeros((n, d))
        d_rot = np.zeros(n) if d == 2 else np.zeros((n, 4))
        d_weight = np.zeros((n, d))
        if len(cache.s_idx) == 0:
            return d_pos, d_scale, d_rot, d_weight

        c = cache
        g, delta, w, mdelta, e2a, v, rot = (c.g, c.delta, c.w, c.mdelta,
                                            c.e2a, c.v, c.rot)
        p = c.p_idx

        def scatter(target, vals):
            if target.ndim == 1:
                target += np.bincount(p, weights=vals, minlength=n)
            else:
                for k in range(target.shape[1]):
                    target[:, k] += np.bincount(p, weights=vals[:, k],
                                                minlength=n)

        if sigma is not None:
            sg = sigma[c.s_idx]
            sv = np.sum(sg * v, axis=1)
            scatter(d_weight, sg * (g - self.clamp)[:, None])
            scatter(d_pos, (sv * g)[:, None] * mdelta)
            scatter(d_scale, (-(sv * g))[:, None] * e2a * w * w)
            if d == 2:
                jd_dot_md = -delta[:, 1] * mdelta[:, 0] + delta[:, 0] * mdelta[:, 1]
                scatter(d_rot, sv * g * jd_dot_md)
            else:
                drot = self._rotation_jacobians()[p]
                y = np.einsum("pbij,pi->pbj", drot, delta)
                dw_ = e2a * w
                scatter(d_rot, -(sv * g)[:, None]
                        * np.einsum("pbj,pj->pb", y, dw_))

        if cot_grad is not None:
            tg = cot_grad[c.s_idx]  # (P, d, d)
            t = np.einsum("pkl,pl->pk", tg, v)
            mdt = np.sum(mdelta * t, axis=1)
            u = np.einsum("pk,pkj->pj", t, rot)  # R^T t
            mt = np.einsum("pkj,pj->pk", rot, e2a * u)  # Sigma^-1 t
            scatter(d_weight, -g[:, None] * np.einsum("pk,pkl->pl", mdelta, tg))
            scatter(d_pos, (-(g * mdt))[:, None] * mdelta + g[:, None] * mt)
            scatter(d_scale, g[:, None] * e2a * (w * w * mdt[:, None] - 2.0 * w * u))
            if d == 2:
                jd_dot_md = -delta[:, 1] * mdelta[:, 0] + delta[:, 0] * mdelta[:, 1]
                jt_dot_md = -t[:, 1] * mdelta[:, 0] + t[:, 0] * mdelta[:, 1]
                jd_dot_mt = -delta[:, 1] * mt[:, 0] + delta[:, 0] * mt[:, 1]
                scatter(d_rot, g * (-jd_dot_md * mdt + jt_dot_md + jd_dot_mt))
            else:
                drot = self._rotation_jacobians()[p]
                y = np.einsum("pbij,pi->pbj", drot, delta)
                z = np.einsum("pbij,pi->pbj", drot, t)
                dw_ = e2a * w
                du_ = e2a * u
                y_dw = np.einsum("pbj,pj->pb", y, dw_)
                scatter(d_rot, g[:, None] * (y_dw * mdt[:, None]
                        - np.einsum("pbj,pj->pb", z, dw_)
                        - np.einsum("pbj,pj->pb", y, du_)))
        return d_pos, d_scale, d_rot, d_weight

    # ------------------------------------------------------ flat parameters

    def get_flat(self) -> np.ndarray:
        """Parameters as one vector: positions, log inverse scales,
        rotations, weights (row-major per particle within each block)."""
        return np.concatenate([self.positions.ravel(),
                               self.log_inv_scale.ravel(),
                               self.rotations.ravel(),
                               self.weights.ravel()])

    def set_flat(self, vec: np.ndarray) -> None:
        n, d, r = self.n, self.dim, self.rotation_size
        sizes = [n * d, n * d, n * r, n * d]
        if vec.shape != (sum(sizes),):
            raise ValueError("flat vector length mismatch")
        a, b = 0, sizes[0]
        self.positions = vec[a:b].reshape(n, d).copy()
        a, b = b, b + sizes[1]
        self.log_inv_scale = vec[a:b].reshape(n, d).copy()
        a, b = b, b + sizes[2]
        self.rotations = vec[a:b].reshape((n,) if d == 2 else (n, 4)).copy()
        a, b = b, b + sizes[3]
        self.weights = vec[a:b].reshape(n, d).copy()
        self.rebuild_hash()
