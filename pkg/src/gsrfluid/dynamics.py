"""Time integration: flow maps, reseeding, and the per-frame projection loop.

One frame advances by (1) splitting over-elongated kernels and refitting
them locally, (2) advecting kernel centers through the RK4 flow map as an
initial guess, and (3) optimizing the transported-vorticity /
divergence-free / boundary objective with Adam, gradient surgery on the
vorticity-divergence pair, a plateau scheduler, and windowed early stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import DivergedError
from .field import GsrField
from .fitting import local_refit
from .losses import LossBreakdown, total_loss_projection
from .optim import (OptimizerState, adam_step, early_stop, pcgrad_combine,
                    plateau_step)
from .params import Hyperparams, ParamGradient, group_slices
from .rng import substream
from .scenes.sampling import SceneSampler


@dataclass
class FlowMapContext:
    """Frozen previous-frame field plus the step size.

    fd_step is the finite-difference step for the forward-map Jacobian,
    scaled to the domain size.
    """

    prev: GsrField
    h: float
    fd_step: float

    @classmethod
    def create(cls, prev: GsrField, h: float, domain) -> "FlowMapContext":
        step = 1e-4 * domain.diagonal / np.sqrt(domain.dim)
        return cls(prev, float(h), float(step))


def _rk4(field: GsrField, pts: np.ndarray, h: float) -> np.ndarray:
    if h == 0.0:
        return pts.copy()
    k1 = field.evaluate_points(pts)
    k2 = field.evaluate_points(pts + (0.5 * h) * k1)
    k3 = field.evaluate_points(pts + (0.5 * h) * k2)
    k4 = field.evaluate_points(pts + h * k3)
    return pts + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_forward(ctx: FlowMapContext, pts: np.ndarray) -> np.ndarray:
    """Forward flow map over one step of the previous frame's field."""
    return _rk4(ctx.prev, np.atleast_2d(np.asarray(pts, dtype=np.float64)),
                ctx.h)


def rk4_backward(ctx: FlowMapContext, pts: np.ndarray) -> np.ndarray:
    """Backward flow map: the same integrator run with -h."""
    return _rk4(ctx.prev, np.atleast_2d(np.asarray(pts, dtype=np.float64)),
                -ctx.h)


def jacobian_forward(ctx: FlowMapContext, pts: np.ndarray,
                     step: float = None) -> np.ndarray:
    """d(forward map)/dx by central differences, [k, l] = d Phi_l / d x_k."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    q, d = pts.shape
    if ctx.h == 0.0:
        return np.tile(np.eye(d), (q, 1, 1))
    s = step if step is not None else ctx.fd_step
    out = np.empty((q, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = s
        plus = rk4_forward(ctx, pts + e)
        minus = rk4_forward(ctx, pts - e)
        out[:, k, :] = (plus - minus) / (2.0 * s)
    return out


def advect_positions(field: GsrField, ctx: FlowMapContext) -> np.ndarray:
    """Move kernel centers through the forward map; returns the anchors.

    Scales, rotations, and weights are untouched; the hash is rebuilt.
    The new positions double as the drift-penalty anchors.
    """
    field.positions = rk4_forward(ctx, field.positions)
    field.rebuild_hash()
    return field.positions.copy()


def vorticity_target(ctx: FlowMapContext, points: np.ndarray) -> np.ndarray:
    """Vorticity transported to `points` from the previous frame.

    2D: scalar vorticity carried along the backward map.  3D: the curl at
    the backward image, stretched by the forward-map Jacobian there.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    back = rk4_backward(ctx, pts)
    curl = ctx.prev.curl_points(back)
    if ctx.prev.dim == 2:
        return curl
    jac = jacobian_forward(ctx, back)
    # omega_l = sum_k dPhi_l/dx_k * curl_k with jac[k, l] = dPhi_l/dx_k
    return np.einsum("qkl,qk->ql", jac, curl)


# ------------------------------------------------------------- reseeding

def split_indices(field: GsrField, r_aniso: float) -> np.ndarray:
    alpha = field.log_inv_scale
    ratio = np.exp(alpha.max(axis=1) - alpha.min(axis=1))
    return np.flatnonzero(ratio >= r_aniso)


def reseed(field: GsrField, hyper: Hyperparams, sampler: SceneSampler,
           frame: int, refit: bool = True):
    """Split kernels with max(s) >= r_aniso * min(s) into two children.

    Children sample their centers from the parent's own Gaussian, halve
    the scale on the (first) max-scale axis, and inherit everything else.
    A local fit against the frozen pre-split field then tunes the children
    and their overlap neighbors.  Returns (field, number of splits); the
    input field is returned unchanged when nothing splits.
    """
    split = split_indices(field, hyper.r_aniso)
    if len(split) == 0:
        return field, 0
    frozen = field.copy()
    counts = np.ones(field.n, dtype=np.int64)
    counts[split] = 2
    new_pos = np.repeat(field.positions, counts, axis=0)
    new_alpha = np.repeat(field.log_inv_scale, counts, axis=0)
    new_rot = np.repeat(field.rotations, counts, axis=0)
    new_w = np.repeat(field.weights, counts, axis=0)

    starts = np.cumsum(counts) - counts  # first child row per parent
    child_rows = np.concatenate([starts[split], starts[split] + 1])
    parent_rows = np.concatenate([split, split])

    rng = substream(hyper.seed, "reseed", frame)
    z = rng.standard_normal((len(child_rows), field.dim))
    rot = field.rotation_matrices[parent_rows]
    scales = field.scales[parent_rows]
    offsets = np.einsum("pij,pj->pi", rot, scales * z)
    new_pos[child_rows] = field.positions[parent_rows] + offsets
    # halving the max scale doubles its inverse scale; s = exp(-alpha), so
    # the max-scale axis is the argmin of alpha (first index on ties)
    axis = np.argmin(field.log_inv_scale[parent_rows], axis=1)
    new_alpha[child_rows, axis] += np.log(2.0)

    out = GsrField(field.dim, new_pos, new_alpha, new_rot, new_w, field.clamp)
    if refit:
        local_refit(out, child_rows, frozen, sampler, hyper, frame=frame)
    return out, len(split)


# ---------------------------------------------------------- frame stepping

@dataclass
class FrameHistory:
    """Per-iteration projection records for one frame."""

    breakdowns: list = dataclass_field(default_factory=list)
    learning_rates: list = dataclass_field(default_factory=list)
    n_splits: int = 0
    stopped_early: bool = False

    def totals(self):
        return [b.total for b in self.breakdowns]

    def rows(self):
        for it, (b, lr) in enumerate(zip(self.breakdowns, self.learning_rates)):
            yield [it] + b.as_row() + [lr["position"], lr["log_inv_scale"],
                                       lr["rotation"], lr["weight"]]


def optimize_projection(field: GsrField, prev: GsrField,
                        sampler: SceneSampler, hyper: Hyperparams,
                        frame: int, t: float, anchors: np.ndarray,
                        timestep: float, max_iterations: int = None,
                        stream: str = "proj") -> FrameHistory:
    """Run the physics-based optimization loop in place on `field`."""
    ctx = FlowMapContext.create(prev, timestep, sampler.scene.domain)
    state = OptimizerState.for_field(field, hyper, "projection")
    history = FrameHistory()
    slices = group_slices(field.n, field.dim)
    budget = max_iterations if max_iterations is not None \
        else hyper.iters_projection
    vor_hist, div_hist = [], []
    w = hyper.weights
    for it in range(budget):
        rng = substream(hyper.seed, stream, frame, it)
        batch = sampler.sample_batch(hyper, rng, t)
        omega = vorticity_target(ctx, batch.interior)
        terms = total_loss_projection(field, batch, omega, anchors, hyper)
        bd = terms.breakdown
        if not np.isfinite(bd.total):
            raise DivergedError(
                f"non-finite projection loss at frame {frame}, iteration {it}",
                field=field, iteration=it)
        g_vor, g_div = pcgrad_combine(terms.grad_vorticity.flatten(),
                                      terms.grad_divergence.flatten())
        flat = w.vorticity * g_vor + w.divergence * g_div \
            + terms.grad_rest.flatten()
        grad = ParamGradient.unflatten(flat, field.n, field.dim)
        adam_step(state, field, grad)
        plateau_step(state, bd.total)
        history.breakdowns.append(bd)
        history.learning_rates.append(state.learning_rates())
        vor_hist.append(bd.vorticity)
        div_hist.append(bd.divergence)
        if early_stop(vor_hist, div_hist, hyper.early_stop_window,
                      hyper.early_stop_rel):
            history.stopped_early = True
            break
    return history


def step_frame(prev_field: GsrField, sampler: SceneSampler,
               hyper: Hyperparams, frame: int,
               max_iterations: int = None):
    """Advance one frame; returns (new field, FrameHistory).

    The input field is never mutated.  Reseeding runs first; the reseeded
    field (frozen) drives the flow maps and vorticity targets of the
    projection loop, matching the solver's frame recurrence.
    """
    h = sampler.scene.dt
    t = frame * h
    reseeded, n_splits = reseed(prev_field.copy(), hyper, sampler, frame)
    prev_frozen = reseeded.copy()
    work = reseeded
    ctx = FlowMapContext.create(prev_frozen, h, sampler.scene.domain)
    anchors = advect_positions(work, ctx)
    history = optimize_projection(work, prev_frozen, sampler, hyper, frame,
                                  t, anchors, h,
                                  max_iterations=max_iterations)
    history.n_splits = n_splits
    return work, history
