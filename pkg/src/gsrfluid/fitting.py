"""Layout, initialization fitting, local refits, and scene normalization.

The initial layout places isotropic kernels on a uniform grid whose
spacing a makes the node count closest to the requested target; scales are
a / sqrt(-2 ln c) so each kernel's support ball has radius exactly a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import GsrField
from .losses import total_loss_init
from .optim import OptimizerState, adam_step, plateau_step
from .params import Hyperparams
from .particles import DEFAULT_CLAMP
from .rng import substream
from .scenes.base import AnalyticField, SceneConfig
from .scenes.sampling import SceneSampler


def _grid_nodes(domain, spacing: float):
    """Node coordinates per axis: uniform spacing, centered, boundary-exact
    on axes whose side is a multiple of the spacing."""
    axes = []
    for k in range(domain.dim):
        length = domain.sides[k]
        count = max(2, int(round(length / spacing)) + 1)
        margin = 0.5 * (length - (count - 1) * spacing)
        axes.append(domain.lo[k] + margin + spacing * np.arange(count))
    return axes


def init_layout(domain, particle_target: int,
                clamp: float = DEFAULT_CLAMP) -> GsrField:
    """Uniform grid of zero-weight isotropic kernels.

    Spacing is chosen from the shortest side so the total node count is
    closest to particle_target; per-axis grids are centered inside the
    domain when sides are not commensurate.
    """
    d = domain.dim
    lmin = float(domain.sides.min())
    best = None
    for n1 in range(2, 4096):
        a = lmin / (n1 - 1)
        count = 1
        for k in range(d):
            count *= max(2, int(round(domain.sides[k] / a)) + 1)
        score = abs(count - particle_target)
        if best is None or score < best[0]:
            best = (score, a)
        if count > 16 * particle_target:
            break
    spacing = best[1]
    axes = _grid_nodes(domain, spacing)
    grids = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([g.ravel() for g in grids], axis=1)
    n = len(positions)
    s = spacing / np.sqrt(-2.0 * np.log(clamp))
    log_inv_scale = np.full((n, d), -np.log(s))
    if d == 2:
        rotations = np.zeros(n)
    else:
        rotations = np.zeros((n, 4))
        rotations[:, 0] = 1.0
    return GsrField(d, positions, log_inv_scale, rotations,
                    np.zeros((n, d)), clamp)


@dataclass
class FitHistory:
    """Per-iteration rows: (iter, value, grad, aniso, volume, total, lr...)"""

    rows: list

    def totals(self):
        return [r[5] for r in self.rows]


def fit_initial(field: GsrField, sampler: SceneSampler, hyper: Hyperparams,
                phase: str = "init", iterations: int = None,
                target: AnalyticField = None, trainable=None,
                stream: str = "init") -> FitHistory:
    """Adam-fit the field to an analytic target under the init objective.

    Mutates `field` in place for `iterations` steps (default the init
    budget) using the given phase's learning rates and fresh interior
    batches each iteration.
    """
    tgt = target if target is not None else sampler.scene.initial_field
    iters = iterations if iterations is not None else hyper.iters_init
    state = OptimizerState.for_field(field, hyper, phase)
    rows = []
    for it in range(iters):
        rng = substream(hyper.seed, stream, it)
        batch = sampler.init_batch(hyper, rng)
        total, grad, parts = total_loss_init(field, tgt.velocity,
                                             tgt.gradient, batch, hyper)
        if not np.isfinite(total):
            from .errors import DivergedError
            raise DivergedError(f"non-finite init loss at iteration {it}",
                                field=field, iteration=it)
        adam_step(state, field, grad, trainable=trainable)
        plateau_step(state, total)
        lrs = state.learning_rates()
        rows.append((it, parts["value"], parts["grad"], parts["aniso"],
                     parts["volume"], total,
                     lrs["position"], lrs["log_inv_scale"],
                     lrs["rotation"], lrs["weight"]))
    return FitHistory(rows)


def overlapping_neighbors(field: GsrField, indices: np.ndarray) -> np.ndarray:
    """Particles whose support balls overlap any of the given particles'."""
    if len(indices) == 0:
        return np.zeros(0, dtype=np.int64)
    radii = field.support_radii
    pos = field.positions
    sel = np.zeros(field.n, dtype=bool)
    for i in indices:
        dist = np.linalg.norm(pos - pos[i], axis=1)
        sel |= dist <= radii + radii[i]
    return np.flatnonzero(sel)


def local_refit(field: GsrField, new_indices: np.ndarray,
                target_field: GsrField, sampler: SceneSampler,
                hyper: Hyperparams, frame: int = 0) -> None:
    """Refit children and their overlap neighbors to the pre-split field.

    Only the trainable set moves; everything else stays bit-identical.
    Uses the reseed learning rates for hyper.iters_reseed iterations.
    """
    if len(new_indices) == 0:
        return
    trainable_idx = overlapping_neighbors(field, np.asarray(new_indices))
    trainable = np.zeros(field.n, dtype=bool)
    trainable[trainable_idx] = True
    target = AnalyticField(target_field.evaluate_points,
                           target_field.gradient_points)
    fit_initial(field, sampler, hyper, phase="reseed",
                iterations=hyper.iters_reseed, target=target,
                trainable=trainable, stream=f"reseed_fit/{frame}")


# -------------------------------------------------------- normalization

def normalization_factor(scene: SceneConfig) -> float:
    l0 = float(scene.domain.sides.min())
    return 10.0 / l0 if scene.dim == 2 else 1.0 / l0


def normalize_scene(scene: SceneConfig):
    """Rescale a scene to canonical size; returns (scene', k).

    Coordinates and boundary geometry are multiplied by k; velocities and
    flux targets become k * f(x / k); gradients are invariant.  The time
    step is unchanged.  With scene.normalize False, k = 1 and the scene
    passes through.
    """
    if not scene.normalize:
        scene.scale_factor = 1.0
        return scene, 1.0
    k = normalization_factor(scene)
    inner = scene.initial_field

    def vel(pts, _f=inner.velocity):
        return k * _f(pts / k)

    def grad(pts, _g=inner.gradient):
        return _g(pts / k)

    scaled = SceneConfig(
        name=scene.name, dim=scene.dim, domain=scene.domain.scaled(k),
        initial_field=AnalyticField(vel, grad),
        boundaries=[b.scaled(k) for b in scene.boundaries],
        obstacles=[o.scaled(k) for o in scene.obstacles],
        dt=scene.dt, frames=scene.frames,
        particle_target=scene.particle_target,
        hyper_overrides=dict(scene.hyper_overrides),
        normalize=False,
        karman=scene.karman.scaled(k) if scene.karman is not None else None,
        scale_factor=k)
    return scaled, k


def denormalize_field(field: GsrField, k: float) -> GsrField:
    """Map a field fitted in normalized coordinates back to world units."""
    if k == 1.0:
        return field.copy()
    return GsrField(field.dim, field.positions / k,
                    field.log_inv_scale + np.log(k), field.rotations,
                    field.weights / k, field.clamp)


def normalize_field(field: GsrField, k: float) -> GsrField:
    """Inverse of denormalize_field."""
    if k == 1.0:
        return field.copy()
    return GsrField(field.dim, field.positions * k,
                    field.log_inv_scale - np.log(k), field.rotations,
                    field.weights * k, field.clamp)


class WorldFieldView:
    """Evaluate a normalized field in world coordinates.

    Velocities scale by 1/k and positions by k; spatial derivatives (and so
    divergence and curl) are scale-invariant.
    """

    def __init__(self, field: GsrField, k: float):
        self.field = field
        self.k = float(k)

    @property
    def dim(self):
        return self.field.dim

    def evaluate_points(self, pts):
        return self.field.evaluate_points(np.asarray(pts) * self.k) / self.k

    def gradient_points(self, pts):
        return self.field.gradient_points(np.asarray(pts) * self.k)

    def divergence_points(self, pts):
        return self.field.divergence_points(np.asarray(pts) * self.k)

    def curl_points(self, pts):
        return self.field.curl_points(np.asarray(pts) * self.k)
