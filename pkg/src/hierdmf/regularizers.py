"""Regularization operators and weights.

Two penalties steer the factorization. A cross-subject group sparsity
term sums, per component row, the ratio of the column-wise pooled L2
norms to the row-wise pooled L2 norm (an L2,1/L2 ratio over subjects).
A graph smoothness term Tr(V L V') penalizes voxel-level map differences
across spatially adjacent, temporally correlated voxels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .datamodel import HierarchySpec, NeighborGraph, SubjectTimeseries
from .errors import ConfigError, ValidationError


@dataclass(frozen=True)
class SubjectGraphOperators:
    """Affinity W, degree vector, and Laplacian L = D - W for one subject.

    W is zero outside neighbor-graph edges; on an edge (a, b) it is
    (1 + rho_ab) / 2 with rho the Pearson correlation of the two voxel
    time series (rho := 0 when either column has zero variance).
    """

    affinity: sparse.csr_array
    degrees: np.ndarray
    laplacian: sparse.csr_array
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_weights: np.ndarray


@dataclass(frozen=True)
class RegularizationWeights:
    lambda_c: tuple[float, ...]
    lambda_m: float


def build_affinity(ts: SubjectTimeseries, graph: NeighborGraph) -> SubjectGraphOperators:
    """Build one subject's graph operators from its time series."""
    x = ts.data
    if x.shape[1] != graph.node_count:
        raise ValidationError(
            f"subject {ts.subject_id}: {x.shape[1]} voxels vs graph with "
            f"{graph.node_count} nodes"
        )
    s = graph.node_count
    a = graph.edges[:, 0]
    b = graph.edges[:, 1]
    xc = x - x.mean(axis=0)
    norms = np.sqrt(np.sum(xc * xc, axis=0))
    num = np.sum(xc[:, a] * xc[:, b], axis=0)
    den = norms[a] * norms[b]
    rho = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    np.clip(rho, -1.0, 1.0, out=rho)
    w = (1.0 + rho) / 2.0

    ij = (np.concatenate([a, b]), np.concatenate([b, a]))
    affinity = sparse.csr_array(
        sparse.coo_array((np.concatenate([w, w]), ij), shape=(s, s))
    )
    degrees = np.asarray(affinity.sum(axis=1)).ravel()
    laplacian = sparse.csr_array(sparse.diags_array(degrees) - affinity)
    degrees.setflags(write=False)
    for arr in (a, b):
        arr.setflags(write=False)
    w.setflags(write=False)
    return SubjectGraphOperators(
        affinity=affinity,
        degrees=degrees,
        laplacian=laplacian,
        edge_a=a,
        edge_b=b,
        edge_weights=w,
    )


def graph_reg_value(v1: np.ndarray, ops: SubjectGraphOperators) -> float:
    """Tr(V L V'), evaluated edge-wise in O(|edges| * K)."""
    diff = v1[:, ops.edge_a] - v1[:, ops.edge_b]
    return float(np.sum(ops.edge_weights * np.sum(diff * diff, axis=0)))


def group_sparsity_value(mats: Sequence[np.ndarray]) -> float:
    """Cross-subject L2,1/L2 ratio summed over component rows.

    mats holds one K x S_j factor per subject, all the same shape. Rows
    that are zero in every subject contribute 0 (the 0/0 convention).
    """
    stack = np.stack([np.asarray(m, dtype=np.float64) for m in mats], axis=0)
    if stack.ndim != 3:
        raise ValidationError("expected a sequence of 2-D factors")
    g = np.sqrt(np.sum(stack * stack, axis=0))
    l21 = np.sum(g, axis=1)
    l2 = np.sqrt(np.sum(g * g, axis=1))
    ratio = np.divide(l21, l2, out=np.zeros_like(l21), where=l2 > 0)
    return float(np.sum(ratio))


def regularization_weights(
    spec: HierarchySpec, n_subjects: int, n_timepoints: int, graph: NeighborGraph
) -> RegularizationWeights:
    """Data-size-aware weights.

    lambda_c[j] = alpha * n * T / K_j per scale; lambda_m = beta * T /
    (K_1 * mean_degree). A graph without edges cannot carry a smoothness
    penalty, so beta > 0 with an edgeless graph is a configuration error.
    """
    if n_subjects < 1 or n_timepoints < 1:
        raise ConfigError("need at least one subject and one time point")
    lam_c = tuple(
        spec.alpha * n_subjects * n_timepoints / k for k in spec.K
    )
    if spec.beta == 0:
        lam_m = 0.0
    else:
        n_m = graph.mean_degree
        if n_m == 0:
            raise ConfigError(
                "beta > 0 requires a neighbor graph with at least one edge"
            )
        lam_m = spec.beta * n_timepoints / (spec.K[0] * n_m)
    return RegularizationWeights(lambda_c=lam_c, lambda_m=lam_m)
