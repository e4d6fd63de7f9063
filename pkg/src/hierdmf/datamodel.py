"""Core data types: subject time series, neighbor graphs, cohorts, the
hierarchy configuration, per-subject factor stacks, and synthetic ground
truth containers.

All containers are frozen dataclasses; array payloads are copied on
construction and marked read-only. Expensive whole-cohort checks
(finiteness, cross-subject consistency) live in :func:`validate_cohort`
so that a malformed cohort can still be constructed and then diagnosed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError


def _freeze(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SubjectTimeseries:
    """One subject's signal matrix, time points (rows) by voxels (columns)."""

    subject_id: str
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if self.data.ndim != 2:
            raise ValidationError(
                f"subject {self.subject_id}: data must be 2-D, got ndim={self.data.ndim}"
            )
        t, s = self.data.shape
        if t < 2 or s < 1:
            raise ValidationError(
                f"subject {self.subject_id}: need at least 2 time points and 1 voxel, got {t}x{s}"
            )

    @property
    def n_timepoints(self) -> int:
        return self.data.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected spatial adjacency over voxels.

    Edges are stored as an (E, 2) int array with each row (a, b), a < b,
    deduplicated and sorted lexicographically.
    """

    node_count: int
    edges: np.ndarray

    def __post_init__(self):
        if self.node_count < 1:
            raise ValidationError("graph needs at least one node")
        e = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            lo = np.minimum(e[:, 0], e[:, 1])
            hi = np.maximum(e[:, 0], e[:, 1])
            e = np.stack([lo, hi], axis=1)
            if np.any(lo == hi):
                bad = int(lo[np.argmax(lo == hi)])
                raise ValidationError(f"self-loop on node {bad}")
            if lo.min() < 0 or hi.max() >= self.node_count:
                raise ValidationError(
                    f"edge endpoint out of range for node_count={self.node_count}"
                )
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
            dup = np.all(e[1:] == e[:-1], axis=1)
            if dup.any():
                a, b = e[1:][dup][0]
                raise ValidationError(f"duplicate edge ({a}, {b})")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.node_count

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)


@dataclass(frozen=True)
class Cohort:
    """A set of subjects sharing one voxel grid and one neighbor graph."""

    subjects: tuple[SubjectTimeseries, ...]
    graph: NeighborGraph

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if not self.subjects:
            raise ValidationError("cohort has no subjects")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_timepoints(self) -> int:
        return self.subjects[0].n_timepoints

    @property
    def n_voxels(self) -> int:
        return self.subjects[0].n_voxels

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(s.subject_id for s in self.subjects)


def validate_cohort(cohort: Cohort) -> None:
    """Check cross-subject consistency and finiteness.

    Raises ValidationError naming the offending subject for: dimension
    mismatch across subjects, graph/voxel count mismatch, or non-finite
    entries.
    """
    first = cohort.subjects[0]
    t, s = first.data.shape
    for sub in cohort.subjects[1:]:
        if sub.data.shape != (t, s):
            raise ValidationError(
                f"subject {sub.subject_id}: shape {sub.data.shape} does not match "
                f"subject {first.subject_id} shape {(t, s)}"
            )
    if cohort.graph.node_count != s:
        raise ValidationError(
            f"graph has {cohort.graph.node_count} nodes but subjects have {s} voxels"
        )
    for sub in cohort.subjects:
        if not np.all(np.isfinite(sub.data)):
            flat = int(np.flatnonzero(~np.isfinite(sub.data))[0])
            r, c = divmod(flat, s)
            raise ValidationError(
                f"subject {sub.subject_id}: non-finite entry at (t={r}, voxel={c})"
            )


@dataclass(frozen=True)
class HierarchySpec:
    """Hierarchy configuration: component counts per scale plus solver knobs.

    K lists component counts from the finest scale (K[0], voxel-level) to
    the coarsest (K[-1]) and must be strictly decreasing. alpha scales the
    cross-subject group-sparsity weights, beta the graph-smoothness weight.
    """

    K: tuple[int, ...]
    alpha: float = 1.0
    beta: float = 10.0
    max_outer_iters: int = 100
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        k = tuple(int(v) for v in self.K)
        object.__setattr__(self, "K", k)
        if len(k) < 1:
            raise ConfigError("K must list at least one scale")
        if any(v < 1 for v in k):
            raise ConfigError(f"component counts must be >= 1, got {k}")
        if any(k[i + 1] >= k[i] for i in range(len(k) - 1)):
            raise ConfigError(f"K must be strictly decreasing, got {k}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if self.max_outer_iters < 0:
            raise ConfigError("max_outer_iters must be >= 0")
        if self.rel_tol < 0:
            raise ConfigError("rel_tol must be >= 0")

    @property
    def h(self) -> int:
        """Number of scales."""
        return len(self.K)


@dataclass(frozen=True)
class FactorStack:
    """Per-subject factors, one entry per scale.

    For a hierarchical (joint) decomposition Vt[0] is the K_1 x S
    voxel-level map and Vt[j] for j > 0 is the K_{j+1} x K_j layer factor;
    the scale-j map is the product Vt[j-1] ... Vt[0]. Flat strategies
    (independent, greedy) store a K_j x S voxel-level map per scale
    directly. U[j] holds the T x K_{j+1} time courses for scale j+1.
    """

    subject_id: str
    Vt: tuple[np.ndarray, ...]
    U: tuple[np.ndarray, ...]

    def __post_init__(self):
        vt = tuple(_freeze(v) for v in self.Vt)
        u = tuple(_freeze(x) for x in self.U)
        object.__setattr__(self, "Vt", vt)
        object.__setattr__(self, "U", u)
        if len(vt) != len(u) or not vt:
            raise ValidationError(
                f"subject {self.subject_id}: need one Vt and one U per scale"
            )

    @property
    def n_scales(self) -> int:
        return len(self.Vt)

    def validate(self, tol: float = 1e-12) -> None:
        """Assert non-negativity, finiteness, and row sup-norm in {0, 1}."""
        for j, v in enumerate(self.Vt):
            if not np.all(np.isfinite(v)):
                raise ValidationError(
                    f"subject {self.subject_id}: non-finite Vt at scale {j + 1}"
                )
            if v.min(initial=0.0) < 0:
                raise ValidationError(
                    f"subject {self.subject_id}: negative entry in Vt at scale {j + 1}"
                )
            row_max = v.max(axis=1)
            ok = (row_max == 0.0) | (np.abs(row_max - 1.0) <= tol)
            if not np.all(ok):
                bad = int(np.flatnonzero(~ok)[0])
                raise ValidationError(
                    f"subject {self.subject_id}: scale {j + 1} row {bad} has "
                    f"sup-norm {row_max[bad]!r}, expected 0 or 1"
                )
        for j, u in enumerate(self.U):
            if not np.all(np.isfinite(u)):
                raise ValidationError(
                    f"subject {self.subject_id}: non-finite U at scale {j + 1}"
                )


@dataclass(frozen=True)
class SyntheticGroundTruth:
    """Generator output kept for scoring recovered factors.

    group_Vt holds the group-level layer factors (finest first). Only the
    finest layer is perturbed per subject; subject_Vt1[i] is subject i's
    jittered voxel-level map. subject_U[i] holds that subject's coarsest
    time courses. Scale-j truth maps are products of the layer factors.
    """

    group_Vt: tuple[np.ndarray, ...]
    subject_Vt1: tuple[np.ndarray, ...]
    subject_U: tuple[np.ndarray, ...]
    subject_ids: tuple[str, ...]
    noise_sigma: float
    grid: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "group_Vt", tuple(_freeze(v) for v in self.group_Vt))
        object.__setattr__(
            self, "subject_Vt1", tuple(_freeze(v) for v in self.subject_Vt1)
        )
        object.__setattr__(self, "subject_U", tuple(_freeze(u) for u in self.subject_U))
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "grid", (int(self.grid[0]), int(self.grid[1])))

    @property
    def n_scales(self) -> int:
        return len(self.group_Vt)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_Vt1)

    def subject_factors(self, i: int) -> list[np.ndarray]:
        """Layer factors for subject i, finest first."""
        return [self.subject_Vt1[i], *self.group_Vt[1:]]

    def subject_scale_map(self, i: int, scale: int) -> np.ndarray:
        """Subject i's true K_scale x S map (scale is 1-based)."""
        factors = self.subject_factors(i)
        v = factors[0]
        for j in range(1, scale):
            v = factors[j] @ v
        return v

    def group_scale_map(self, scale: int) -> np.ndarray:
        v = self.group_Vt[0]
        for j in range(1, scale):
            v = self.group_Vt[j] @ v
        return v
