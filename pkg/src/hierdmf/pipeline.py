"""Decomposition strategies and result persistence.

Three ways to obtain multi-scale maps for a cohort:

* joint: greedy layer-wise pre-training on temporally concatenated data,
  then collaborative refinement of all layers with cross-subject group
  sparsity and per-subject graph smoothness. Scale maps nest exactly.
* independent: one single-scale collaborative run per scale, each with a
  fresh seeded initialization (master seed plus 0-based scale index).
* greedy: pre-training once, then each scale refined separately at the
  voxel level starting from the collapsed pre-trained product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.cluster.vq import kmeans2
from scipy.optimize import nnls
from scipy.spatial.distance import squareform

from .datamodel import (
    Cohort,
    FactorStack,
    HierarchySpec,
    SubjectTimeseries,
    validate_cohort,
)
from .errors import ConfigError, FormatError, ValidationError
from .factorization import (
    ObjectiveBreakdown,
    _objective_raw,
    chain_product,
    compute_group_aggregates,
    fit_timecourses,
    has_converged,
    normalize_rows_inf,
    sparse_semi_nmf,
    update_layer_deep,
    update_layer_finest,
)
from .parallel import parallel_map
from .regularizers import (
    build_affinity,
    graph_reg_value,
    group_sparsity_value,
    regularization_weights,
)
from .storage import _read_meta, _write_meta, load_matrix, parse_grid, store_matrix

PRETRAIN_ITERS = 200

# Finest-layer pre-training partition: embedding width beyond k (extra
# eigenvectors separate parcels that straddle a boundary in the minimal
# embedding), k-means restarts on the spectral embedding (best distortion
# wins), and the row-stochastic diffusion that softens the hard partition
# into overlapping seeds.
PARCEL_EMBED_EXTRA = 2
PARCEL_KMEANS_RESTARTS = 8
PARCEL_DIFFUSION_STEPS = 2
PARCEL_DIFFUSION_WEIGHT = 0.5
# Starting weight for non-members of a merge cluster. Multiplicative
# updates keep exact zeros at zero, so a small floor is what lets a layer
# learn secondary cross-group weights at all.
MERGE_INIT_FLOOR = 0.01

# Called after each outer iteration with (iteration, per-subject layer
# factors, per-subject coarsest time courses).
IterationHook = Callable[[int, list[list[np.ndarray]], list[np.ndarray]], None]


@dataclass(frozen=True)
class DecompositionResult:
    """Factors, objective trace, and bookkeeping for one strategy run.

    hierarchical is True when stacks hold nested layer factors (joint) and
    False when each scale's entry is already a voxel-level map.
    dead_components maps 1-based scale to rows that are zero in every
    subject.
    """

    strategy: str
    spec: HierarchySpec
    subject_ids: tuple[str, ...]
    stacks: tuple[FactorStack, ...]
    objective_trace: tuple[ObjectiveBreakdown, ...]
    converged: bool
    iterations: int
    dead_components: dict[int, tuple[int, ...]]
    hierarchical: bool

    @property
    def n_scales(self) -> int:
        return self.spec.h

    def _subject_index(self, subject: int | str) -> int:
        if isinstance(subject, str):
            return self.subject_ids.index(subject)
        return subject

    def scale_map(self, subject: int | str, scale: int) -> np.ndarray:
        """K_scale x S map for one subject (scale is 1-based)."""
        stack = self.stacks[self._subject_index(subject)]
        if not self.hierarchical:
            return stack.Vt[scale - 1]
        v = stack.Vt[0]
        for j in range(1, scale):
            v = stack.Vt[j] @ v
        return v

    def scale_maps(self, subject: int | str) -> list[np.ndarray]:
        return [self.scale_map(subject, j) for j in range(1, self.n_scales + 1)]

    def timecourses(self, subject: int | str, scale: int) -> np.ndarray:
        return self.stacks[self._subject_index(subject)].U[scale - 1]


def spectral_parcel_init(cohort: Cohort, k: int, seed: int) -> np.ndarray:
    """Spatially informed starting factor for the finest layer.

    Normalized-cuts parcellation of the cohort's neighbor graph weighted
    by pooled time-course affinity: embed voxels with the bottom
    eigenvectors of the symmetric normalized Laplacian, cluster the
    row-normalized embedding with restarted k-means, then diffuse the hard
    parcel indicators a couple of steps along the graph so parcels overlap
    at their borders. Multiplicative updates never revive exact zeros, so
    the diffusion halo is what lets the refinement move a border voxel
    between neighboring parcels.
    """
    pooled = SubjectTimeseries(
        subject_id="pooled", data=np.vstack([s.data for s in cohort.subjects])
    )
    w = build_affinity(pooled, cohort.graph).affinity.toarray()
    s = w.shape[0]
    deg = np.maximum(w.sum(axis=1), 1e-12)
    inv_sqrt = 1.0 / np.sqrt(deg)
    laplacian = np.eye(s) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    _, eigvecs = np.linalg.eigh(laplacian)
    emb = eigvecs[:, : min(k + PARCEL_EMBED_EXTRA, s)]
    emb = emb / np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-12)
    best: tuple[float, np.ndarray] | None = None
    for r in range(PARCEL_KMEANS_RESTARTS):
        centers, labels = kmeans2(
            emb, k, minit="++", rng=np.random.default_rng([seed, r])
        )
        distortion = float(np.sum((emb - centers[labels]) ** 2))
        if best is None or distortion < best[0]:
            best = (distortion, labels)
    v = np.zeros((k, s))
    v[best[1], np.arange(s)] = 1.0
    step = w / deg[:, None]
    for _ in range(PARCEL_DIFFUSION_STEPS):
        v = v + PARCEL_DIFFUSION_WEIGHT * (v @ step.T)
    v, _ = normalize_rows_inf(v)
    return v


def merge_cluster_init(y: np.ndarray, k: int) -> np.ndarray:
    """Starting factor for a merge layer from clustered time courses.

    Average-linkage agglomerative clustering of the previous layer's
    time courses on correlation distance fixes the grouping; the starting
    weights are a non-negative regression of every course onto the
    cluster centroid courses, floored so secondary weights can still grow
    during refinement. Regression seeds the cross-group weights near
    their fitted size, which pure membership indicators cannot: a
    multiplicative update takes a long time to grow a weight from the
    floor up to a substantial secondary value.
    """
    centered = y - y.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    d = centered / np.where(norms > 0, norms, 1.0)
    dist = np.clip(1.0 - d.T @ d, 0.0, 2.0)
    np.fill_diagonal(dist, 0.0)
    tree = linkage(squareform(dist, checks=False), method="average")
    labels = fcluster(tree, t=k, criterion="maxclust") - 1
    m = y.shape[1]
    centroids = np.zeros((y.shape[0], k))
    for g in range(k):
        members = labels == g
        centroids[:, g] = y[:, members].mean(axis=1) if members.any() else y.mean(axis=1)
    v = np.zeros((k, m))
    for f in range(m):
        coeffs, _ = nnls(centroids, y[:, f])
        v[:, f] = coeffs
    v = np.maximum(v, MERGE_INIT_FLOOR)
    v, _ = normalize_rows_inf(v)
    return v


def pretrain_greedy(cohort: Cohort, spec: HierarchySpec) -> list[np.ndarray]:
    """Layer-wise sparse semi-NMF chain on the stacked cohort.

    All subjects are concatenated along time; layer 1 factors the stacked
    data, layer j factors the previous layer's time courses. The sparsity
    weight matches the collaborative schedule alpha * n * T / K_j because
    the stacked matrix has n * T rows.

    Multi-scale runs start layer 1 from the spectral parcellation and the
    merge layers from clustered time courses; the updates only shrink
    exact zeros, so a structureless uniform start tends to freeze layer 1
    into whatever the random draw covered. Single-scale runs keep the
    seeded uniform start, which is unconstrained by any hierarchy above
    it and serves as the per-scale baseline.
    """
    y = np.vstack([s.data for s in cohort.subjects])
    factors: list[np.ndarray] = []
    for j, k in enumerate(spec.K):
        lam = spec.alpha * y.shape[0] / k
        init = None
        if spec.h > 1:
            init = (
                spectral_parcel_init(cohort, k, spec.seed)
                if j == 0
                else merge_cluster_init(y, k)
            )
        u, v = sparse_semi_nmf(
            y, k, lam_sparsity=lam, seed=spec.seed + j,
            iters=PRETRAIN_ITERS, rel_tol=spec.rel_tol, init=init,
        )
        factors.append(v)
        y = u
    return factors


def _check_dimensions(cohort: Cohort, spec: HierarchySpec) -> None:
    validate_cohort(cohort)
    k1 = spec.K[0]
    if k1 > min(cohort.n_timepoints, cohort.n_voxels):
        raise ConfigError(
            f"K_1={k1} exceeds min(T={cohort.n_timepoints}, S={cohort.n_voxels})"
        )


def _joint_optimize(
    cohort: Cohort,
    spec: HierarchySpec,
    init_factors: Sequence[np.ndarray],
    threads: int = 1,
    on_iteration: IterationHook | None = None,
) -> tuple[list[list[np.ndarray]], list[list[np.ndarray]], list[ObjectiveBreakdown], bool, int]:
    """Collaborative refinement of pre-initialized layer factors.

    Every subject starts from a copy of the shared init. One outer
    iteration sweeps scales fine to coarse. Per scale the update sees the
    time courses the hierarchy itself implies: the closed-form refit of
    the coarsest courses at the top scale, and the partial product of
    those courses with the layers above at every finer scale. That keeps
    each multiplicative step a descent step on the shared objective,
    whereas refitting every scale's courses against the data mid-sweep
    re-balances the fit term and lets the regularizers push uphill.
    Row sup-normalization after each update is compensated by a scale
    cascade through the layers above, ending in the coarsest courses, so
    the collapsed product, and with it the fit term, is unchanged.
    Each layer sweep is kept only if it does not increase the objective
    terms it touches; the multiplicative step descends the fit surrogate,
    but the normalization gauge can push the regularizers uphill, and
    rejecting those sweeps makes the recorded trace non-increasing by
    construction. The objective is recorded once per outer iteration
    after a final coarsest-scale refit.
    """
    _check_dimensions(cohort, spec)
    n = cohort.n_subjects
    h = spec.h
    weights = regularization_weights(spec, n, cohort.n_timepoints, cohort.graph)
    x_list = [s.data for s in cohort.subjects]
    ops = None
    if weights.lambda_m > 0:
        ops = parallel_map(
            lambda sub: build_affinity(sub, cohort.graph), cohort.subjects, threads
        )

    vts = [[f.copy() for f in init_factors] for _ in range(n)]
    full = [[None] * h for _ in range(n)]  # collapsed map per scale

    def refresh_full(i: int, start: int = 0) -> None:
        if start == 0:
            full[i][0] = vts[i][0]
            start = 1
        for j in range(start, h):
            full[i][j] = vts[i][j] @ full[i][j - 1]

    for i in range(n):
        refresh_full(i)

    def refit_coarsest(i: int) -> np.ndarray:
        return fit_timecourses(x_list[i], [full[i][h - 1]])

    u_h = parallel_map(refit_coarsest, list(range(n)), threads)
    trace = [
        _objective_raw(
            x_list, vts, u_h, weights, ops, v_full_list=[f[-1] for f in full]
        )
    ]
    converged = False
    iterations = 0
    for it in range(1, spec.max_outer_iters + 1):
        iterations = it
        for j in range(h):
            lam_c = weights.lambda_c[j]

            if j == h - 1:
                u_h = parallel_map(refit_coarsest, list(range(n)), threads)
                u_scale = u_h
            else:
                def implied(i: int) -> np.ndarray:
                    psi = u_h[i]
                    for jj in range(h - 1, j, -1):
                        psi = psi @ vts[i][jj]
                    return psi

                u_scale = parallel_map(implied, list(range(n)), threads)
            agg = compute_group_aggregates([vts[i][j] for i in range(n)])

            def step(i: int) -> tuple[np.ndarray, np.ndarray]:
                if j == 0:
                    v = update_layer_finest(
                        vts[i][0], u_scale[i], x_list[i],
                        None if ops is None else ops[i],
                        agg, lam_c, weights.lambda_m,
                    )
                else:
                    v = update_layer_deep(
                        vts[i][j], u_scale[i], x_list[i], full[i][j - 1], agg, lam_c
                    )
                return normalize_rows_inf(v)

            stepped = parallel_map(step, list(range(n)), threads)

            # Stage the sweep: the updated layer plus a normalization
            # cascade through every layer above it. Each layer absorbs the
            # scales from below into its columns, renormalizes its own
            # rows, and passes the residual scales up; the coarsest
            # courses absorb the remainder. Every staged state therefore
            # has sup-normalized rows at all layers, so a rejected sweep
            # can never strand a denormalized factor.
            cand_layers: list[list[np.ndarray]] = [[None] * h for _ in range(n)]
            cand_u_h = list(u_h)
            for i in range(n):
                v, scales = stepped[i]
                cand_layers[i][j] = v
                for jj in range(j + 1, h):
                    v, scales = normalize_rows_inf(vts[i][jj] * scales[None, :])
                    cand_layers[i][jj] = v
                cand_u_h[i] = u_h[i] * scales[None, :]
            cand_full = []
            for i in range(n):
                fl = list(full[i])
                for jj in range(j, h):
                    fl[jj] = (
                        cand_layers[i][jj]
                        if jj == 0
                        else cand_layers[i][jj] @ fl[jj - 1]
                    )
                cand_full.append(fl)

            # Exact change in the terms this sweep touches: the fit, the
            # sparsity of this layer and of every layer that received
            # scales through the cascade, and the graph term at the
            # finest layer. Everything else is untouched.
            delta = 0.0
            for i in range(n):
                old_r = x_list[i] - u_h[i] @ full[i][h - 1]
                new_r = x_list[i] - cand_u_h[i] @ cand_full[i][h - 1]
                delta += float(np.sum(new_r * new_r) - np.sum(old_r * old_r))
            for jj in range(j, h):
                if weights.lambda_c[jj] > 0:
                    delta += weights.lambda_c[jj] * (
                        group_sparsity_value([cand_layers[i][jj] for i in range(n)])
                        - group_sparsity_value([vts[i][jj] for i in range(n)])
                    )
            if j == 0 and ops is not None:
                delta += weights.lambda_m * sum(
                    graph_reg_value(cand_layers[i][0], ops[i])
                    - graph_reg_value(vts[i][0], ops[i])
                    for i in range(n)
                )
            if delta <= 0:
                for i in range(n):
                    for jj in range(j, h):
                        vts[i][jj] = cand_layers[i][jj]
                    full[i] = cand_full[i]
                u_h = cand_u_h

        u_h = parallel_map(refit_coarsest, list(range(n)), threads)
        trace.append(
            _objective_raw(
                x_list, vts, u_h, weights, ops, v_full_list=[f[-1] for f in full]
            )
        )
        if on_iteration is not None:
            on_iteration(it, vts, u_h)
        if has_converged(trace[-2].total, trace[-1].total, spec.rel_tol):
            converged = True
            break

    # Refit every scale's time courses against the final factors so the
    # returned stacks are internally consistent.
    us: list[list[np.ndarray]] = [[None] * h for _ in range(n)]
    for j in range(h):
        def refit_final(i: int) -> np.ndarray:
            return fit_timecourses(x_list[i], [full[i][j]])

        new = parallel_map(refit_final, list(range(n)), threads)
        for i in range(n):
            us[i][j] = new[i]
    return vts, us, trace, converged, iterations


def _dead_rows(vts: list[list[np.ndarray]], h: int) -> dict[int, tuple[int, ...]]:
    dead: dict[int, tuple[int, ...]] = {}
    for j in range(h):
        peak = np.max(np.stack([v[j] for v in vts]), axis=(0, 2))
        dead[j + 1] = tuple(int(r) for r in np.flatnonzero(peak == 0))
    return dead


def _assemble(
    cohort: Cohort,
    spec: HierarchySpec,
    strategy: str,
    hierarchical: bool,
    vts: list[list[np.ndarray]],
    us: list[list[np.ndarray]],
    trace: Sequence[ObjectiveBreakdown],
    converged: bool,
    iterations: int,
) -> DecompositionResult:
    stacks = tuple(
        FactorStack(subject_id=sid, Vt=tuple(vts[i]), U=tuple(us[i]))
        for i, sid in enumerate(cohort.subject_ids)
    )
    for st in stacks:
        st.validate()
    return DecompositionResult(
        strategy=strategy,
        spec=spec,
        subject_ids=cohort.subject_ids,
        stacks=stacks,
        objective_trace=tuple(trace),
        converged=converged,
        iterations=iterations,
        dead_components=_dead_rows(vts, spec.h),
        hierarchical=hierarchical,
    )


def decompose_joint(
    cohort: Cohort,
    spec: HierarchySpec,
    threads: int = 1,
    on_iteration: IterationHook | None = None,
) -> DecompositionResult:
    """Pre-train, then refine all layers collaboratively."""
    _check_dimensions(cohort, spec)
    init = pretrain_greedy(cohort, spec)
    vts, us, trace, converged, iterations = _joint_optimize(
        cohort, spec, init, threads, on_iteration
    )
    return _assemble(
        cohort, spec, "joint", True, vts, us, trace, converged, iterations
    )


def _sum_traces(traces: Sequence[Sequence[ObjectiveBreakdown]]) -> list[ObjectiveBreakdown]:
    """Element-wise sum across per-scale traces, shorter runs padded with
    their final value. Keeps a single non-increasing trace when every
    per-scale trace is non-increasing."""
    length = max(len(tr) for tr in traces)
    out = []
    for k in range(length):
        picks = [tr[min(k, len(tr) - 1)] for tr in traces]
        out.append(
            ObjectiveBreakdown(
                fit=sum(p.fit for p in picks),
                sparsity=sum(p.sparsity for p in picks),
                graph=sum(p.graph for p in picks),
            )
        )
    return out


def _assemble_flat(
    cohort: Cohort,
    spec: HierarchySpec,
    strategy: str,
    per_scale: list[tuple[list[list[np.ndarray]], list[list[np.ndarray]], list[ObjectiveBreakdown], bool, int]],
) -> DecompositionResult:
    n = cohort.n_subjects
    vts = [[per_scale[j][0][i][0] for j in range(spec.h)] for i in range(n)]
    us = [[per_scale[j][1][i][0] for j in range(spec.h)] for i in range(n)]
    trace = _sum_traces([run[2] for run in per_scale])
    converged = all(run[3] for run in per_scale)
    iterations = max(run[4] for run in per_scale)
    return _assemble(
        cohort, spec, strategy, False, vts, us, trace, converged, iterations
    )


def decompose_independent(
    cohort: Cohort, spec: HierarchySpec, threads: int = 1
) -> DecompositionResult:
    """One single-scale collaborative run per scale, independently seeded.

    Scale j runs the joint model with K = (K_j,) and seed = master seed
    plus the 0-based scale index, so a single-scale spec reproduces
    decompose_joint exactly.
    """
    _check_dimensions(cohort, spec)
    per_scale = []
    for j, k in enumerate(spec.K):
        sub = replace(spec, K=(k,), seed=spec.seed + j)
        init = pretrain_greedy(cohort, sub)
        per_scale.append(_joint_optimize(cohort, sub, init, threads))
    return _assemble_flat(cohort, spec, "independent", per_scale)


def decompose_greedy(
    cohort: Cohort, spec: HierarchySpec, threads: int = 1
) -> DecompositionResult:
    """Pre-train once, then refine each scale separately at voxel level.

    Scale j starts from the sup-normalized collapsed product of the
    pre-trained layers 1..j and is refined with the single-scale
    collaborative model (no fresh randomness).
    """
    _check_dimensions(cohort, spec)
    factors = pretrain_greedy(cohort, spec)
    per_scale = []
    cum = None
    for j, k in enumerate(spec.K):
        cum = factors[0] if j == 0 else factors[j] @ cum
        init_map, _ = normalize_rows_inf(cum)
        sub = replace(spec, K=(k,), seed=spec.seed + j)
        per_scale.append(_joint_optimize(cohort, sub, [init_map], threads))
    return _assemble_flat(cohort, spec, "greedy", per_scale)


STRATEGIES = {
    "joint": decompose_joint,
    "independent": decompose_independent,
    "greedy": decompose_greedy,
}


def decompose(
    cohort: Cohort, spec: HierarchySpec, strategy: str, threads: int = 1
) -> DecompositionResult:
    if strategy not in STRATEGIES:
        raise ConfigError(
            f"unknown strategy {strategy!r}; expected one of {sorted(STRATEGIES)}"
        )
    return STRATEGIES[strategy](cohort, spec, threads=threads)


def save_result(
    result: DecompositionResult,
    out_dir: str | Path,
    grid: tuple[int, int] | None = None,
) -> None:
    """Write per-subject per-scale factors, trace.csv, and result.meta."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for i, sid in enumerate(result.subject_ids):
        stack = result.stacks[i]
        for j in range(result.n_scales):
            store_matrix(stack.Vt[j], d / f"Vt_{sid}_{j + 1}.dmat")
            store_matrix(stack.U[j], d / f"U_{sid}_{j + 1}.dmat")
    with open(d / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "fit", "sparsity", "graph", "total"])
        for it, b in enumerate(result.objective_trace):
            writer.writerow([it, repr(b.fit), repr(b.sparsity), repr(b.graph), repr(b.total)])
    spec = result.spec
    dead = ";".join(
        f"{scale}:{','.join(str(r) for r in rows) if rows else '-'}"
        for scale, rows in sorted(result.dead_components.items())
    )
    items = [
        ("strategy", result.strategy),
        ("hierarchical", str(int(result.hierarchical))),
        ("subjects", ",".join(result.subject_ids)),
        ("h", str(spec.h)),
        ("K", ",".join(str(k) for k in spec.K)),
        ("alpha", repr(float(spec.alpha))),
        ("beta", repr(float(spec.beta))),
        ("seed", str(spec.seed)),
        ("max_outer_iters", str(spec.max_outer_iters)),
        ("rel_tol", repr(float(spec.rel_tol))),
        ("converged", str(int(result.converged))),
        ("iterations", str(result.iterations)),
        ("dead_components", dead),
    ]
    if grid is not None:
        items.append(("grid", f"{grid[0]}x{grid[1]}"))
    _write_meta(d / "result.meta", items)


def load_result(result_dir: str | Path) -> tuple[DecompositionResult, dict[str, str]]:
    """Load a result directory; returns the result and its meta mapping."""
    d = Path(result_dir)
    meta_path = d / "result.meta"
    if not meta_path.exists():
        raise FormatError(f"{d}: missing result.meta")
    meta = _read_meta(meta_path)
    spec = HierarchySpec(
        K=tuple(int(v) for v in meta["K"].split(",")),
        alpha=float(meta["alpha"]),
        beta=float(meta["beta"]),
        max_outer_iters=int(meta["max_outer_iters"]),
        rel_tol=float(meta["rel_tol"]),
        seed=int(meta["seed"]),
    )
    ids = tuple(meta["subjects"].split(","))
    stacks = []
    for sid in ids:
        vt = [load_matrix(d / f"Vt_{sid}_{j + 1}.dmat") for j in range(spec.h)]
        u = [load_matrix(d / f"U_{sid}_{j + 1}.dmat") for j in range(spec.h)]
        stacks.append(FactorStack(subject_id=sid, Vt=tuple(vt), U=tuple(u)))
    trace = []
    with open(d / "trace.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["iter", "fit", "sparsity", "graph", "total"]:
            raise FormatError(f"{d}/trace.csv: unexpected header {header}")
        for row in reader:
            trace.append(
                ObjectiveBreakdown(
                    fit=float(row[1]), sparsity=float(row[2]), graph=float(row[3])
                )
            )
    dead: dict[int, tuple[int, ...]] = {}
    if meta["dead_components"]:
        for part in meta["dead_components"].split(";"):
            scale, _, rows = part.partition(":")
            dead[int(scale)] = (
                tuple(int(r) for r in rows.split(",")) if rows != "-" else ()
            )
    result = DecompositionResult(
        strategy=meta["strategy"],
        spec=spec,
        subject_ids=ids,
        stacks=tuple(stacks),
        objective_trace=tuple(trace),
        converged=bool(int(meta["converged"])),
        iterations=int(meta["iterations"]),
        dead_components=dead,
        hierarchical=bool(int(meta["hierarchical"])),
    )
    return result, meta


def result_grid(meta: dict[str, str]) -> tuple[int, int] | None:
    if "grid" in meta:
        return parse_grid(meta["grid"])
    return None
