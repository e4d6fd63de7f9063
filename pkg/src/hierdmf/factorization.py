"""Numerical kernels for collaborative hierarchical semi-NMF.

The model factors each subject's T x S matrix X as U_h Vt_h ... Vt_1 with
non-negative layer factors Vt_j (rows sup-normalized) and unconstrained
time courses U. Layer factors move by multiplicative updates whose
numerator collects the negative part of the gradient and whose
denominator collects the positive part; time courses are refit in closed
form through a pseudo-inverse. Cross-subject coupling enters the layer
updates through group aggregates computed from all subjects at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import Cohort, FactorStack
from .errors import ConfigError, ValidationError
from .regularizers import (
    RegularizationWeights,
    SubjectGraphOperators,
    graph_reg_value,
    group_sparsity_value,
)

# Relative floor added to update denominators, scaled by the numerator peak.
EPS_SCALE = 1e-12


@dataclass(frozen=True)
class GroupAggregates:
    """Cross-subject pooled statistics of one scale's factors.

    g[k, s]   root sum of squares over subjects at position (k, s)
    l21[k]    sum over columns of g (row L2,1 mass)
    l2[k]     L2 norm of row k of g (pooled over subjects and columns)
    """

    g: np.ndarray
    l21: np.ndarray
    l2: np.ndarray


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Additive pieces of the joint objective at one iterate."""

    fit: float
    sparsity: float
    graph: float

    @property
    def total(self) -> float:
        return self.fit + self.sparsity + self.graph


def split_signs(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split m into (pos, neg) with pos - neg == m, both non-negative.

    Equivalent to pos = (|m| + m) / 2 and neg = (|m| - m) / 2 but immune
    to overflow near the float64 maximum.
    """
    m = np.asarray(m, dtype=np.float64)
    pos = np.where(m > 0, m, 0.0)
    neg = np.where(m < 0, -m, 0.0)
    return pos, neg


def chain_product(vts: Sequence[np.ndarray]) -> np.ndarray:
    """Collapse layer factors [Vt_j, ..., Vt_1] (coarse first) to one map.

    Folds from the fine end so that scale maps nest bitwise with
    V_j = Vt_j @ V_{j-1}.
    """
    chain = list(vts)
    v = chain[-1]
    for f in reversed(chain[:-1]):
        v = f @ v
    return v


def fit_timecourses(x: np.ndarray, vt_chain: Sequence[np.ndarray]) -> np.ndarray:
    """Closed-form refit U = X V^+ for V = Vt_j ... Vt_1.

    The pseudo-inverse comes from an SVD with singular values below
    max(T, K) * eps * sigma_max treated as zero, which yields the
    minimum-norm least-squares time courses even for rank-deficient maps.
    """
    v = chain_product(vt_chain)
    k = v.shape[0]
    t = x.shape[0]
    rcond = max(t, k) * np.finfo(np.float64).eps
    return x @ np.linalg.pinv(v, rcond=rcond)


def compute_group_aggregates(mats: Sequence[np.ndarray]) -> GroupAggregates:
    """Pool one scale's factors over subjects (ascending subject order)."""
    stack = np.stack([np.asarray(m, dtype=np.float64) for m in mats], axis=0)
    g = np.sqrt(np.sum(stack * stack, axis=0))
    l21 = np.sum(g, axis=1)
    l2 = np.sqrt(np.sum(g * g, axis=1))
    return GroupAggregates(g=g, l21=l21, l2=l2)


def _sparsity_terms(
    v: np.ndarray, agg: GroupAggregates, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator contributions of the group penalty.

    Both are defined as 0 wherever the pooled norms vanish; those
    positions have v == 0 for every subject, so the update keeps them
    fixed regardless.
    """
    ratio = np.divide(
        agg.l21, agg.l2**3, out=np.zeros_like(agg.l21), where=agg.l2 > 0
    )
    num = lam * v * ratio[:, None]
    pooled = agg.g * agg.l2[:, None]
    den = lam * np.divide(v, pooled, out=np.zeros_like(v), where=pooled > 0)
    return num, den


def update_layer_finest(
    v: np.ndarray,
    u: np.ndarray,
    x: np.ndarray,
    ops: SubjectGraphOperators | None,
    agg: GroupAggregates,
    lam_c: float,
    lam_m: float,
) -> np.ndarray:
    """Multiplicative update of one subject's voxel-level map.

    v <- v * sqrt(num / den) with
      num = [U'X]+ + [U'U]- v + lam_m * v W   + lam_c * v * l21 / l2^3
      den = [U'X]- + [U'U]+ v + lam_m * v D   + lam_c * v / (g * l2) + eps
    where eps = 1e-12 * (1 + max(num)). Zero entries stay exactly zero and
    the result is exactly non-negative.
    """
    utx = u.T @ x
    utu = u.T @ u
    xp, xn = split_signs(utx)
    up, un = split_signs(utu)
    num = xp + un @ v
    den = xn + up @ v
    if lam_m > 0:
        if ops is None:
            raise ValidationError("graph operators required when lam_m > 0")
        num = num + lam_m * (ops.affinity @ v.T).T
        den = den + lam_m * (v * ops.degrees[None, :])
    if lam_c > 0:
        snum, sden = _sparsity_terms(v, agg, lam_c)
        num = num + snum
        den = den + sden
    eps = EPS_SCALE * (1.0 + float(num.max(initial=0.0)))
    return v * np.sqrt(num / (den + eps))


def update_layer_deep(
    v: np.ndarray,
    u: np.ndarray,
    x: np.ndarray,
    vbar: np.ndarray,
    agg: GroupAggregates,
    lam_c: float,
) -> np.ndarray:
    """Multiplicative update of a deeper layer factor (scale j > 1).

    vbar is the already-collapsed product of the finer layers, so the
    reconstruction at this scale is U (v @ vbar). The update mirrors the
    finest-scale rule with [U'X]+- right-multiplied by vbar' and the
    quadratic term by vbar vbar'; the graph penalty applies only at the
    voxel level and is absent here.
    """
    utx = u.T @ x
    utu = u.T @ u
    xp, xn = split_signs(utx)
    up, un = split_signs(utu)
    vvt = vbar @ vbar.T
    proj = v @ vvt
    num = xp @ vbar.T + un @ proj
    den = xn @ vbar.T + up @ proj
    if lam_c > 0:
        snum, sden = _sparsity_terms(v, agg, lam_c)
        num = num + snum
        den = den + sden
    eps = EPS_SCALE * (1.0 + float(num.max(initial=0.0)))
    return v * np.sqrt(num / (den + eps))


def normalize_rows_inf(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each row by its max so the sup-norm is exactly 1.

    Zero rows are left untouched and get scale 1. Returns (normalized,
    scales). Idempotent: a second application is the identity.
    """
    row_max = np.max(v, axis=1)
    scales = np.where(row_max > 0, row_max, 1.0)
    return v / scales[:, None], scales


def objective(
    cohort: Cohort,
    stacks: Sequence[FactorStack],
    weights: RegularizationWeights,
    ops_per_subject: Sequence[SubjectGraphOperators] | None = None,
) -> ObjectiveBreakdown:
    """Joint objective for hierarchical stacks.

    fit      sum_i || X_i - U_h V_h ||_F^2 with V_h the collapsed chain
    sparsity sum_j lambda_c[j] * group ratio of scale-j factors
    graph    lambda_m * sum_i Tr(V_1 L_i V_1')
    """
    vt_lists = [list(st.Vt) for st in stacks]
    u_h = [st.U[-1] for st in stacks]
    x_list = [s.data for s in cohort.subjects]
    return _objective_raw(x_list, vt_lists, u_h, weights, ops_per_subject)


def _objective_raw(
    x_list: Sequence[np.ndarray],
    vt_lists: Sequence[Sequence[np.ndarray]],
    u_h_list: Sequence[np.ndarray],
    weights: RegularizationWeights,
    ops_per_subject: Sequence[SubjectGraphOperators] | None,
    v_full_list: Sequence[np.ndarray] | None = None,
) -> ObjectiveBreakdown:
    n_scales = len(vt_lists[0])
    fit = 0.0
    for i, x in enumerate(x_list):
        v_full = (
            v_full_list[i]
            if v_full_list is not None
            else chain_product(list(reversed(vt_lists[i])))
        )
        resid = x - u_h_list[i] @ v_full
        fit += float(np.sum(resid * resid))
    sparsity = 0.0
    for j in range(n_scales):
        lam = weights.lambda_c[j]
        if lam > 0:
            sparsity += lam * group_sparsity_value([v[j] for v in vt_lists])
    graph = 0.0
    if weights.lambda_m > 0:
        if ops_per_subject is None:
            raise ValidationError("graph operators required when lambda_m > 0")
        for i, vts in enumerate(vt_lists):
            graph += graph_reg_value(vts[0], ops_per_subject[i])
        graph *= weights.lambda_m
    return ObjectiveBreakdown(fit=fit, sparsity=sparsity, graph=graph)


def has_converged(prev_total: float, total: float, rel_tol: float) -> bool:
    """Relative-change stopping rule; rel_tol = 0 disables early stopping."""
    if rel_tol <= 0:
        return False
    return abs(total - prev_total) < rel_tol * max(abs(prev_total), 1e-300)


def sparse_semi_nmf(
    y: np.ndarray,
    k: int,
    lam_sparsity: float = 0.0,
    seed: int = 0,
    iters: int = 200,
    rel_tol: float = 1e-6,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-matrix sparse semi-NMF: Y ~ U V, V >= 0 with sup-normalized rows.

    This is the n = 1 specialization of the collaborative machinery with
    the graph weight at zero; the group aggregates collapse to the factor
    itself. V starts from a seeded uniform [0, 1] draw (rows normalized)
    unless init supplies a (k, S) starting factor, and alternates the
    finest-scale multiplicative update with closed-form U refits until
    iters or a relative objective change below rel_tol. The update only
    shrinks exact zeros, so init decides which entries can ever be active.
    """
    y = np.asarray(y, dtype=np.float64)
    t, s = y.shape
    if k < 1 or k > min(t, s):
        raise ConfigError(f"k={k} must be in [1, min(T={t}, S={s})]")
    if init is None:
        rng = np.random.default_rng(seed)
        v, _ = normalize_rows_inf(rng.uniform(size=(k, s)))
    else:
        if init.shape != (k, s):
            raise ConfigError(f"init shape {init.shape} must be ({k}, {s})")
        v, _ = normalize_rows_inf(np.asarray(init, dtype=np.float64))
    prev = None
    for _ in range(iters):
        u = fit_timecourses(y, [v])
        agg = compute_group_aggregates([v])
        v = update_layer_finest(v, u, y, None, agg, lam_sparsity, 0.0)
        v, _ = normalize_rows_inf(v)
        resid = y - u @ v
        total = float(np.sum(resid * resid))
        if lam_sparsity > 0:
            total += lam_sparsity * group_sparsity_value([v])
        if prev is not None and has_converged(prev, total, rel_tol):
            break
        prev = total
    u = fit_timecourses(y, [v])
    return u, v
