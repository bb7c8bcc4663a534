"""Monte-Carlo loss terms with analytic parameter gradients.

Every term returns (value, ParamGradient).  L1 terms use the sign
subgradient with sign(0) = 0.  Field-dependent terms share one PairCache
per point set, so evaluating several losses on the same batch costs one
neighbor query.

Gradient layout convention everywhere: matrix[k, l] = d v_l / d x_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np

from .errors import EmptyBatchError
from .field import GsrField, PairCache
from .params import Hyperparams, LossWeights, ParamGradient


@dataclass
class SampleBatch:
    """One iteration's sample points.

    interior points drive the PDE terms; boundary points carry their
    precomputed targets (velocity for type-1 pieces, normal flux for
    type-2) and, for type-2, unit normals.
    """

    interior: np.ndarray                      # (Q, d)
    b1_points: np.ndarray = None              # (M1, d)
    b1_targets: np.ndarray = None             # (M1, d)
    b2_points: np.ndarray = None              # (M2, d)
    b2_normals: np.ndarray = None             # (M2, d)
    b2_targets: np.ndarray = None             # (M2,)
    stream: str = ""

    def __post_init__(self):
        d = self.interior.shape[1] if self.interior is not None else 0
        if self.b1_points is None:
            self.b1_points = np.zeros((0, d))
            self.b1_targets = np.zeros((0, d))
        if self.b2_points is None:
            self.b2_points = np.zeros((0, d))
            self.b2_normals = np.zeros((0, d))
            self.b2_targets = np.zeros((0,))


@dataclass
class LossBreakdown:
    vorticity: float = 0.0
    divergence: float = 0.0
    boundary1: float = 0.0
    boundary2: float = 0.0
    aniso: float = 0.0
    volume: float = 0.0
    position: float = 0.0
    total: float = 0.0

    def as_row(self):
        return [self.vorticity, self.divergence, self.boundary1,
                self.boundary2, self.aniso, self.volume, self.position,
                self.total]


def _grad(field: GsrField, cache: PairCache, sigma=None, cot=None) -> ParamGradient:
    return ParamGradient.from_arrays(field.backward(cache, sigma, cot))


def _interior_cache(field: GsrField, batch: SampleBatch,
                    cache: Optional[PairCache]) -> PairCache:
    if batch.interior is None or len(batch.interior) == 0:
        raise EmptyBatchError("no interior samples")
    return cache if cache is not None else field.pair_cache(batch.interior)


# ------------------------------------------------------- fitting losses

def loss_value(field: GsrField, target: Callable, batch: SampleBatch,
               cache: Optional[PairCache] = None):
    """Mean L1 velocity mismatch, 1/(Q d) sum ||v(x) - v~(x)||_1."""
    c = _interior_cache(field, batch, cache)
    q, d = batch.interior.shape
    pred = field.evaluate_points(batch.interior, cache=c)
    resid = target(batch.interior) - pred
    value = float(np.sum(np.abs(resid)) / (q * d))
    sigma = -np.sign(resid) / (q * d)
    return value, _grad(field, c, sigma=sigma)


def loss_grad(field: GsrField, target_gradient: Callable, batch: SampleBatch,
              cache: Optional[PairCache] = None):
    """Mean elementwise-L1 gradient mismatch, 1/(Q d^2) sum ||A - grad v~||_sum."""
    c = _interior_cache(field, batch, cache)
    q, d = batch.interior.shape
    pred = field.gradient_points(batch.interior, cache=c)
    resid = target_gradient(batch.interior) - pred
    value = float(np.sum(np.abs(resid)) / (q * d * d))
    cot = -np.sign(resid) / (q * d * d)
    return value, _grad(field, c, cot=cot)


def loss_aniso(field: GsrField, r_aniso: float):
    """Hinge on the scale anisotropy ratio max(s)/min(s)."""
    n, d = field.n, field.dim
    grad = ParamGradient.zeros(n, d)
    if n == 0:
        return 0.0, grad
    alpha = field.log_inv_scale
    amax, amin = alpha.max(axis=1), alpha.min(axis=1)
    ratio = np.exp(amax - amin)  # s = exp(-alpha), so max s <-> min alpha
    over = ratio - r_aniso
    active = over > 0.0
    value = float(np.sum(over[active]) / n)
    if np.any(active):
        imax, imin = alpha.argmax(axis=1), alpha.argmin(axis=1)
        rows = np.flatnonzero(active)
        grad.log_inv_scale[rows, imax[rows]] += ratio[rows] / n
        grad.log_inv_scale[rows, imin[rows]] -= ratio[rows] / n
    return value, grad


def loss_vol(field: GsrField):
    """Squared deviation of kernel volumes from their mean.

    The gradient flows through the mean as well as each volume.
    """
    n, d = field.n, field.dim
    grad = ParamGradient.zeros(n, d)
    if n == 0:
        return 0.0, grad
    vol = np.exp(-field.log_inv_scale.sum(axis=1))  # prod(s)
    mean = vol.mean()
    h = vol / mean - 1.0
    value = float(np.mean(h * h))
    dldv = (2.0 / n) * (h / mean - np.sum(h * vol) / (n * mean * mean))
    grad.log_inv_scale[:] = (-vol * dldv)[:, None]
    return value, grad


# ---------------------------------------------------- projection losses

def loss_vorticity(field: GsrField, omega: np.ndarray, batch: SampleBatch,
                   cache: Optional[PairCache] = None):
    """Mean L1 mismatch between the field curl and the target vorticity."""
    c = _interior_cache(field, batch, cache)
    q, d = batch.interior.shape
    curl = field.curl_points(batch.interior, cache=c)
    resid = curl - omega
    dhat = 1 if d == 2 else 3
    value = float(np.sum(np.abs(resid)) / (q * dhat))
    s = np.sign(resid) / (q * dhat)
    cot = np.zeros((q, d, d))
    if d == 2:
        cot[:, 0, 1] = s
        cot[:, 1, 0] = -s
    else:
        cot[:, 1, 2], cot[:, 2, 1] = s[:, 0], -s[:, 0]
        cot[:, 2, 0], cot[:, 0, 2] = s[:, 1], -s[:, 1]
        cot[:, 0, 1], cot[:, 1, 0] = s[:, 2], -s[:, 2]
    return value, _grad(field, c, cot=cot)


def loss_divergence(field: GsrField, batch: SampleBatch,
                    cache: Optional[PairCache] = None):
    """Mean squared divergence, 1/Q sum |div v~|^2."""
    c = _interior_cache(field, batch, cache)
    q, d = batch.interior.shape
    div = field.divergence_points(batch.interior, cache=c)
    value = float(np.mean(div * div))
    cot = np.zeros((q, d, d))
    diag = 2.0 * div / q
    for k in range(d):
        cot[:, k, k] = diag
    return value, _grad(field, c, cot=cot)


def loss_boundary1(field: GsrField, batch: SampleBatch,
                   u_b: Optional[Callable] = None,
                   cache: Optional[PairCache] = None):
    """Prescribed-velocity boundary, mean L1 over type-1 samples."""
    if len(batch.b1_points) == 0:
        raise EmptyBatchError("no type-1 boundary samples")
    c = cache if cache is not None else field.pair_cache(batch.b1_points)
    q, d = batch.b1_points.shape
    target = u_b(batch.b1_points) if u_b is not None else batch.b1_targets
    resid = field.evaluate_points(batch.b1_points, cache=c) - target
    value = float(np.sum(np.abs(resid)) / (q * d))
    sigma = np.sign(resid) / (q * d)
    return value, _grad(field, c, sigma=sigma)


def loss_boundary2(field: GsrField, batch: SampleBatch,
                   f_rhs: Optional[Callable] = None,
                   cache: Optional[PairCache] = None):
    """Prescribed normal flux, mean |v~ . n - f| over type-2 samples."""
    if len(batch.b2_points) == 0:
        raise EmptyBatchError("no type-2 boundary samples")
    c = cache if cache is not None else field.pair_cache(batch.b2_points)
    q = len(batch.b2_points)
    target = f_rhs(batch.b2_points) if f_rhs is not None else batch.b2_targets
    flux = np.sum(field.evaluate_points(batch.b2_points, cache=c)
                  * batch.b2_normals, axis=1)
    resid = flux - target
    value = float(np.mean(np.abs(resid)))
    sigma = (np.sign(resid) / q)[:, None] * batch.b2_normals
    return value, _grad(field, c, sigma=sigma)


def loss_position(field: GsrField, anchors: np.ndarray):
    """Squared drift from the advected anchor positions."""
    n, d = field.n, field.dim
    grad = ParamGradient.zeros(n, d)
    if n == 0:
        return 0.0, grad
    diff = field.positions - anchors
    value = float(np.sum(diff * diff) / (n * d))
    grad.position[:] = 2.0 * diff / (n * d)
    return value, grad


# ------------------------------------------------------------- totals

def total_loss_init(field: GsrField, target: Callable,
                    target_gradient: Callable, batch: SampleBatch,
                    hyper: Hyperparams, cache: Optional[PairCache] = None):
    """Initialization objective: value + gradient + aniso + volume, unit weights.

    Returns (value, ParamGradient, parts dict).
    """
    c = _interior_cache(field, batch, cache)
    v_val, g_val = loss_value(field, target, batch, cache=c)
    v_grd, g_grd = loss_grad(field, target_gradient, batch, cache=c)
    v_ani, g_ani = loss_aniso(field, hyper.r_aniso)
    v_vol, g_vol = loss_vol(field)
    total = v_val + v_grd + v_ani + v_vol
    grad = g_val
    grad += g_grd
    grad += g_ani
    grad += g_vol
    return total, grad, {"value": v_val, "grad": v_grd,
                         "aniso": v_ani, "volume": v_vol}


@dataclass
class ProjectionTerms:
    """All projection-loss terms of one iteration.

    grad_vorticity / grad_divergence stay separate (raw, unweighted) for
    gradient surgery; grad_rest pre-sums every other term with its weight.
    """

    breakdown: LossBreakdown
    grad_vorticity: ParamGradient
    grad_divergence: ParamGradient
    grad_rest: ParamGradient


def combine_projection_terms(values: LossBreakdown,
                             weights: LossWeights) -> float:
    """Weighted total L = w_vor L_vor + w_div L_div + ... (spec weighting)."""
    return (weights.vorticity * values.vorticity
            + weights.divergence * values.divergence
            + weights.boundary1 * values.boundary1
            + weights.boundary2 * values.boundary2
            + weights.aniso * values.aniso
            + weights.volume * values.volume
            + weights.position * values.position)


def total_loss_projection(field: GsrField, batch: SampleBatch,
                          omega: np.ndarray, anchors: np.ndarray,
                          hyper: Hyperparams) -> ProjectionTerms:
    """Evaluate every projection term on one batch.

    Boundary terms with no samples contribute zero.  The returned total
    applies the configured weights, including the vorticity weight (1
    everywhere except scene-specific overrides).
    """
    w = hyper.weights
    bd = LossBreakdown()
    n, d = field.n, field.dim
    interior_cache = _interior_cache(field, batch, None)
    bd.vorticity, g_vor = loss_vorticity(field, omega, batch, cache=interior_cache)
    bd.divergence, g_div = loss_divergence(field, batch, cache=interior_cache)
    rest = ParamGradient.zeros(n, d)
    if len(batch.b1_points):
        bd.boundary1, g_b1 = loss_boundary1(field, batch)
        rest += g_b1.scaled(w.boundary1)
    if len(batch.b2_points):
        bd.boundary2, g_b2 = loss_boundary2(field, batch)
        rest += g_b2.scaled(w.boundary2)
    bd.aniso, g_ani = loss_aniso(field, hyper.r_aniso)
    rest += g_ani.scaled(w.aniso)
    bd.volume, g_vol = loss_vol(field)
    rest += g_vol.scaled(w.volume)
    if w.position != 0.0 and anchors is not None:
        bd.position, g_pos = loss_position(field, anchors)
        rest += g_pos.scaled(w.position)
    elif anchors is not None:
        bd.position, _ = loss_position(field, anchors)
    bd.total = combine_projection_terms(bd, w)
    return ProjectionTerms(bd, g_vor, g_div, rest)
