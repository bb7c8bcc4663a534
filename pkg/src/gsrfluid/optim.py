"""First-order optimization machinery.

Adam with one learning rate per parameter group (positions, log inverse
scales, rotations, weights), a reduce-on-plateau scheduler shared by all
groups, gradient surgery for the vorticity/divergence pair, and the
windowed early-stop rule for the projection loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .errors import DivergedError
from .field import GsrField
from .geometry import normalize_quaternions
from .params import GROUPS, Hyperparams, ParamGradient

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def pcgrad_combine(g_vor: np.ndarray, g_div: np.ndarray):
    """Project conflicting task gradients onto each other's normal plane.

    If the dot product is non-negative both come back unchanged; otherwise
    each loses its component along the other's direction, so following one
    no longer increases the other loss.
    """
    dot = float(np.dot(g_vor, g_div))
    if dot >= 0.0:
        return g_vor, g_div
    n_vor = float(np.linalg.norm(g_vor))
    n_div = float(np.linalg.norm(g_div))
    if n_vor < 1e-20 or n_div < 1e-20:
        return g_vor, g_div
    t1 = g_vor / n_vor
    t2 = g_div / n_div
    out_vor = g_vor - np.dot(g_vor, t2) * t2
    out_div = g_div - np.dot(g_div, t1) * t1
    return out_vor, out_div


def adam_update(m: np.ndarray, v: np.ndarray, t: int, grad: np.ndarray,
                lr: float):
    """One bias-corrected Adam step; returns (delta, m, v) for step t (1-based)."""
    m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
    mhat = m / (1.0 - ADAM_BETA1 ** t)
    vhat = v / (1.0 - ADAM_BETA2 ** t)
    return -lr * mhat / (np.sqrt(vhat) + ADAM_EPS), m, v


@dataclass
class _Group:
    lr: float
    m: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass
class OptimizerState:
    """Adam moments per group plus the plateau scheduler bookkeeping."""

    groups: dict
    factor: float
    patience: int
    min_delta: float
    best: float = np.inf
    bad_count: int = 0

    @classmethod
    def for_field(cls, f: GsrField, hyper: Hyperparams,
                  phase: str) -> "OptimizerState":
        shapes = {"position": f.positions.shape,
                  "log_inv_scale": f.log_inv_scale.shape,
                  "rotation": f.rotations.shape,
                  "weight": f.weights.shape}
        groups = {name: _Group(lr=hyper.lr.rate(phase, name),
                               m=np.zeros(shapes[name]),
                               v=np.zeros(shapes[name]))
                  for name in GROUPS}
        return cls(groups=groups, factor=hyper.plateau_factor,
                   patience=hyper.plateau_patience,
                   min_delta=hyper.plateau_min_delta)

    def learning_rates(self):
        return {name: self.groups[name].lr for name in GROUPS}


def adam_step(state: OptimizerState, f: GsrField, grad: ParamGradient,
              trainable: Optional[np.ndarray] = None) -> None:
    """Apply one Adam step to every parameter group, in place.

    trainable: optional boolean mask over particles; gradients of frozen
    particles are zeroed so their parameters stay bit-identical.
    Quaternions are renormalized after the step; the hash is rebuilt.
    """
    blocks = {"position": (f.positions, grad.position),
              "log_inv_scale": (f.log_inv_scale, grad.log_inv_scale),
              "rotation": (f.rotations, grad.rotation),
              "weight": (f.weights, grad.weight)}
    for name in GROUPS:
        params, g = blocks[name]
        if not np.all(np.isfinite(g)):
            raise DivergedError(f"non-finite gradient in group {name}",
                                field=f)
        if trainable is not None:
            g = g * (trainable if g.ndim == 1 else trainable[:, None])
        gr = state.groups[name]
        gr.t += 1
        delta, gr.m, gr.v = adam_update(gr.m, gr.v, gr.t, g, gr.lr)
        params += delta
    if f.dim == 3 and f.n:
        f.rotations = normalize_quaternions(f.rotations)
    f.rebuild_hash()


def plateau_step(state: OptimizerState, loss: float) -> None:
    """Reduce-on-plateau: after more than `patience` non-improving
    iterations, multiply every group's rate by `factor`."""
    if loss < state.best - state.min_delta:
        state.best = loss
        state.bad_count = 0
        return
    state.bad_count += 1
    if state.bad_count > state.patience:
        for gr in state.groups.values():
            gr.lr *= state.factor
        state.bad_count = 0


def early_stop(vor_history, div_history, window: int = 500,
               rel_threshold: float = 1e-3) -> bool:
    """True when both losses changed by < rel_threshold (relative) over the
    last `window` iterations."""
    if len(vor_history) <= window or len(div_history) <= window:
        return False
    for hist in (vor_history, div_history):
        now, then = hist[-1], hist[-1 - window]
        if abs(now - then) / max(then, 1e-12) >= rel_threshold:
            return False
    return True
