"""Watertight triangle meshes: OBJ loading, surface sampling, containment.

Face normals must point out of the solid (into the fluid); the bundled
bunny generator guarantees that.  Containment uses ray-casting parity
along +x, which is robust for watertight meshes away from exact edge hits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           np.asarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "faces",
                           np.asarray(self.faces, dtype=np.int64))

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]  # (F, 3, 3)

    def face_normals(self) -> np.ndarray:
        t = self.triangles
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def face_areas(self) -> np.ndarray:
        t = self.triangles
        return 0.5 * np.linalg.norm(
            np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def sample_surface(self, count: int, rng: np.random.Generator):
        """Area-uniform points + their face normals."""
        areas = self.face_areas()
        cdf = np.cumsum(areas)
        cdf /= cdf[-1]
        pick = np.searchsorted(cdf, rng.random(count))
        t = self.triangles[pick]
        u = rng.random(count)
        v = rng.random(count)
        flip = u + v > 1.0
        u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
        pts = t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) \
            + v[:, None] * (t[:, 2] - t[:, 0])
        return pts, self.face_normals()[pick]

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Parity of +x ray crossings, vectorized over faces in chunks."""
        pts = np.atleast_2d(points)
        crossings = np.zeros(len(pts), dtype=np.int64)
        tris = self.triangles
        for start in range(0, len(tris), 512):
            t = tris[start:start + 512]
            e1 = t[:, 1] - t[:, 0]
            e2 = t[:, 2] - t[:, 0]
            # Moller-Trumbore with ray direction +x for every point
            d = np.array([1.0, 0.0, 0.0])
            pvec = np.cross(d, e2)  # (F, 3)
            det = np.einsum("fk,fk->f", e1, pvec)
            ok = np.abs(det) > 1e-14
            inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tvec = pts[:, None, :] - t[None, :, 0, :]  # (Q, F, 3)
            u = np.einsum("qfk,fk->qf", tvec, pvec) * inv_det
            qvec = np.cross(tvec, e1[None, :, :])
            v = np.einsum("qfk,k->qf", qvec, d) * inv_det
            tt = np.einsum("qfk,fk->qf", qvec, e2) * inv_det
            hit = ok[None, :] & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (tt > 0.0)
            crossings += hit.sum(axis=1)
        return crossings % 2 == 1

    def scaled(self, k: float) -> "TriangleMesh":
        return TriangleMesh(self.vertices * k, self.faces)


def load_obj(path) -> TriangleMesh:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:4]]
                faces.append(idx)
    return TriangleMesh(np.asarray(verts), np.asarray(faces))


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
