"""Parameter gradients, loss weights, learning rates, and run hyperparameters.

The flat parameter order is fixed project-wide: positions, log inverse
scales, rotations, weights, each block row-major per particle.  Snapshots,
optimizer vectors, and gradient flattening all share it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

GROUPS = ("position", "log_inv_scale", "rotation", "weight")
PHASES = ("init", "projection", "reseed")


@dataclass
class ParamGradient:
    """Per-particle gradient blocks mirroring the field parameter arrays."""

    position: np.ndarray      # (N, d)
    log_inv_scale: np.ndarray  # (N, d)
    rotation: np.ndarray      # (N,) in 2D, (N, 4) in 3D
    weight: np.ndarray        # (N, d)

    @classmethod
    def zeros(cls, n: int, dim: int) -> "ParamGradient":
        rot = np.zeros(n) if dim == 2 else np.zeros((n, 4))
        return cls(np.zeros((n, dim)), np.zeros((n, dim)), rot, np.zeros((n, dim)))

    @classmethod
    def from_arrays(cls, arrays) -> "ParamGradient":
        return cls(*arrays)

    @property
    def n(self) -> int:
        return len(self.position)

    @property
    def dim(self) -> int:
        return self.position.shape[1]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.position.ravel(), self.log_inv_scale.ravel(),
                               self.rotation.ravel(), self.weight.ravel()])

    @classmethod
    def unflatten(cls, vec: np.ndarray, n: int, dim: int) -> "ParamGradient":
        r = 1 if dim == 2 else 4
        sizes = [n * dim, n * dim, n * r, n * dim]
        if vec.shape != (sum(sizes),):
            raise ValueError("flat gradient length mismatch")
        a = 0
        blocks = []
        for s in sizes:
            blocks.append(vec[a:a + s])
            a += s
        rot = blocks[2].reshape((n,) if dim == 2 else (n, 4)).copy()
        return cls(blocks[0].reshape(n, dim).copy(),
                   blocks[1].reshape(n, dim).copy(), rot,
                   blocks[3].reshape(n, dim).copy())

    def __iadd__(self, other: "ParamGradient") -> "ParamGradient":
        self.position += other.position
        self.log_inv_scale += other.log_inv_scale
        self.rotation += other.rotation
        self.weight += other.weight
        return self

    def scaled(self, k: float) -> "ParamGradient":
        return ParamGradient(self.position * k, self.log_inv_scale * k,
                             self.rotation * k, self.weight * k)


def group_slices(n: int, dim: int) -> dict:
    """Slices of each parameter group inside the flat vector."""
    r = 1 if dim == 2 else 4
    sizes = (n * dim, n * dim, n * r, n * dim)
    out, a = {}, 0
    for name, s in zip(GROUPS, sizes):
        out[name] = slice(a, a + s)
        a += s
    return out


@dataclass(frozen=True)
class LossWeights:
    vorticity: float = 1.0
    divergence: float = 1.0
    boundary1: float = 1.0
    boundary2: float = 1.0
    aniso: float = 10.0
    volume: float = 10.0
    position: float = 0.5


@dataclass(frozen=True)
class LearningRateTable:
    """Per-phase, per-group learning rates (phase -> group -> rate)."""

    rates: dict

    def rate(self, phase: str, group: str) -> float:
        return self.rates[phase][group]

    def phase_rates(self, phase: str) -> dict:
        return dict(self.rates[phase])


def lr_table_2d() -> LearningRateTable:
    return LearningRateTable({
        "init": {"position": 1.6e-3, "log_inv_scale": 0.05,
                 "rotation": 0.05, "weight": 5e-3},
        "projection": {"position": 1e-4, "log_inv_scale": 1e-4,
                       "rotation": 1e-4, "weight": 1e-4},
        "reseed": {"position": 1e-2, "log_inv_scale": 0.05,
                   "rotation": 0.05, "weight": 5e-3},
    })


def lr_table_3d() -> LearningRateTable:
    return LearningRateTable({
        "init": {"position": 1e-3, "log_inv_scale": 1e-3,
                 "rotation": 1e-3, "weight": 1e-3},
        "projection": {"position": 3e-4, "log_inv_scale": 1e-5,
                       "rotation": 3e-4, "weight": 1e-5},
        "reseed": {"position": 1e-3, "log_inv_scale": 1e-3,
                   "rotation": 1e-3, "weight": 1e-3},
    })


#: Threshold on max(s)/min(s) above which kernels are penalized and split.
R_ANISO = 1.5


@dataclass
class Hyperparams:
    """Everything the optimization loops need besides the scene itself."""

    dim: int
    weights: LossWeights
    lr: LearningRateTable
    seed: int = 0
    q_interior: int = 4096
    q_boundary: int = 1024
    r_aniso: float = R_ANISO
    plateau_factor: float = 0.9
    plateau_patience: int = 50
    plateau_min_delta: float = 1e-12
    early_stop_window: int = 500
    early_stop_rel: float = 1e-3
    iters_init: int = 400
    iters_projection: int = 4100
    iters_reseed: int = 100

    @classmethod
    def defaults(cls, dim: int, seed: int = 0) -> "Hyperparams":
        if dim == 2:
            return cls(dim=2, weights=LossWeights(), lr=lr_table_2d(), seed=seed)
        return cls(dim=3,
                   weights=LossWeights(boundary1=10.0, boundary2=10.0,
                                       position=0.0),
                   lr=lr_table_3d(), seed=seed,
                   q_interior=16384, q_boundary=2048)

    def override(self, **kwargs) -> "Hyperparams":
        """Copy with scalar fields, loss weights ("lambda_*") or learning
        rates ("lr_<phase>_<group>") replaced."""
        hp = replace(self)
        weights = dict(vorticity=self.weights.vorticity,
                       divergence=self.weights.divergence,
                       boundary1=self.weights.boundary1,
                       boundary2=self.weights.boundary2,
                       aniso=self.weights.aniso,
                       volume=self.weights.volume,
                       position=self.weights.position)
        rates = {ph: dict(self.lr.rates[ph]) for ph in self.lr.rates}
        for key, value in kwargs.items():
            if key.startswith("lambda_"):
                name = key[len("lambda_"):]
                if name not in weights:
                    raise KeyError(f"unknown loss weight {key}")
                weights[name] = float(value)
            elif key.startswith("lr_"):
                phase, group = key[len("lr_"):].split(".", 1)
                rates[phase][group] = float(value)
            elif hasattr(hp, key):
                setattr(hp, key, type(getattr(hp, key))(value))
            else:
                raise KeyError(f"unknown hyperparameter {key}")
        hp.weights = LossWeights(**weights)
        hp.lr = LearningRateTable(rates)
        return hp
