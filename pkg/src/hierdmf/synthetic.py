"""Synthetic cohort generator with known multi-scale ground truth.

The finest scale is a set of spatially compact non-negative blobs laid
out on a rows x cols grid; coarser scales merge finer components through
sparse non-negative mixing matrices. Each subject gets its own smooth
coarsest-scale time courses, a jittered copy of the finest-scale support,
and additive Gaussian noise scaled to the subject's signal RMS. The
neighbor graph is the 4-neighbor grid adjacency. Everything is a pure
function of the seed.
"""

from __future__ import annotations

import numpy as np

from .datamodel import (
    Cohort,
    HierarchySpec,
    NeighborGraph,
    SubjectTimeseries,
    SyntheticGroundTruth,
)
from .errors import ConfigError
from .factorization import chain_product, normalize_rows_inf

# Blob geometry: support radius as a fraction of the placement cell and the
# kernel width as a fraction of that radius. The radius keeps neighboring
# blobs mostly disjoint so each component owns some pure voxels.
RADIUS_FACTOR = 0.8
SIGMA_FRACTION = 0.55
# Some fine components leak a secondary weight into one other group. Leaks
# stay sparse and clearly below the primary weights so that components still
# correlate most with their own group's time course; grouping structure is
# recoverable from the courses while the leaks keep the mixing non-trivial.
CROSS_PROB = 0.5
CROSS_RANGE = (0.1, 0.35)
PRIMARY_RANGE = (0.6, 1.0)
# Values drawn for voxels added by support jitter (relative to the row peak).
JITTER_VALUE_RANGE = (0.2, 0.7)
# Element RMS of each subject's clean signal. The decomposition weights are
# fixed functions of (n, T, K, graph), so the data amplitude sets how strongly
# the fit term dominates them; below roughly RMS 2 on small grids the row
# re-normalization can bounce the smoothness and sparsity terms uphill.
SIGNAL_RMS = 4.0


def grid_graph(rows: int, cols: int) -> NeighborGraph:
    """4-neighbor adjacency of a rows x cols grid, row-major node order."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    return NeighborGraph(
        node_count=rows * cols, edges=np.array(edges, dtype=np.int64).reshape(-1, 2)
    )


def _cell_layout(k: int, rows: int, cols: int) -> tuple[int, int]:
    """Pick a gr x gc placement lattice with gr*gc >= k, aspect-matched."""
    best = None
    for gr in range(1, rows + 1):
        gc = -(-k // gr)
        if gc > cols:
            continue
        aspect_err = abs(rows / gr - cols / gc)
        if best is None or aspect_err < best[0]:
            best = (aspect_err, gr, gc)
    if best is None:
        raise ConfigError(
            f"grid {rows}x{cols} ({rows * cols} cells) cannot place K_1={k} blobs; "
            f"K_1 must be at most rows*cols"
        )
    return best[1], best[2]


def _place_blobs(
    k: int, rows: int, cols: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Return (K x S blob map, K x 2 centers). Rows are sup-normalized."""
    gr, gc = _cell_layout(k, rows, cols)
    cell_h = rows / gr
    cell_w = cols / gc
    radius = RADIUS_FACTOR * min(cell_h, cell_w)
    sigma = SIGMA_FRACTION * radius
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    coords = np.stack([rr.ravel(), cc.ravel()], axis=1).astype(np.float64)
    centers = np.empty((k, 2))
    v1 = np.zeros((k, rows * cols))
    for idx in range(k):
        ci, cj = divmod(idx, gc)
        center = np.array(
            [
                (ci + 0.5) * cell_h + rng.uniform(-0.25, 0.25) * cell_h,
                (cj + 0.5) * cell_w + rng.uniform(-0.25, 0.25) * cell_w,
            ]
        )
        centers[idx] = center
        d2 = np.sum((coords - center[None, :]) ** 2, axis=1)
        vals = np.exp(-d2 / (2.0 * sigma * sigma))
        vals[d2 > radius * radius] = 0.0
        if not np.any(vals > 0):
            raise ConfigError(
                f"blob {idx} has empty support on grid {rows}x{cols} with K_1={k}"
            )
        v1[idx] = vals
    v1, _ = normalize_rows_inf(v1)
    return v1, centers


def _merge_layer(
    k_coarse: int, centers: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Group K_fine components into k_coarse rows with sparse mixing weights.

    Components are ordered by center position and chunked into contiguous,
    near-equal groups; each member gets a primary weight and, with
    probability CROSS_PROB, a secondary weight into one other group.
    Returns (merge matrix, coarse centers).
    """
    k_fine = centers.shape[0]
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    bounds = np.linspace(0, k_fine, k_coarse + 1).round().astype(int)
    m = np.zeros((k_coarse, k_fine))
    for g in range(k_coarse):
        members = order[bounds[g]:bounds[g + 1]]
        for f in members:
            m[g, f] = rng.uniform(*PRIMARY_RANGE)
    if k_coarse > 1:
        for f in range(k_fine):
            if rng.uniform() < CROSS_PROB:
                primary = int(np.argmax(m[:, f]))
                other = int(rng.integers(k_coarse - 1))
                if other >= primary:
                    other += 1
                m[other, f] = rng.uniform(*CROSS_RANGE)
    m, _ = normalize_rows_inf(m)
    weights_sum = m.sum(axis=1, keepdims=True)
    coarse_centers = (m @ centers) / weights_sum
    return m, coarse_centers


def _jitter_support(
    v1: np.ndarray,
    rows: int,
    cols: int,
    amount: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Dilate/erode each blob's support; new voxels get re-drawn values.

    Every outside voxel touching the support may join with probability
    `amount` (value drawn from JITTER_VALUE_RANGE); every boundary voxel
    except the row peak may leave with the same probability.
    """
    out = v1.copy()
    for k in range(v1.shape[0]):
        field = out[k].reshape(rows, cols)
        mask = field > 0
        peak = np.unravel_index(int(np.argmax(field)), field.shape)
        padded = np.pad(mask, 1)
        neighbor_any = (
            padded[:-2, 1:-1] | padded[2:, 1:-1] | padded[1:-1, :-2] | padded[1:-1, 2:]
        )
        grow = np.argwhere(~mask & neighbor_any)
        shrink = np.argwhere(mask & ~(
            padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
        ))
        for r, c in grow:
            if rng.uniform() < amount:
                field[r, c] = rng.uniform(*JITTER_VALUE_RANGE)
        for r, c in shrink:
            if (r, c) == peak:
                continue
            if rng.uniform() < amount:
                field[r, c] = 0.0
        out[k] = field.ravel()
    out, _ = normalize_rows_inf(out)
    return out


def _smooth_timecourses(
    t: int, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Standardized low-pass filtered noise, one column per component."""
    window = max(3, t // 10)
    kernel = np.ones(window) / window
    raw = rng.standard_normal((t, k))
    smooth = np.empty_like(raw)
    for j in range(k):
        smooth[:, j] = np.convolve(raw[:, j], kernel, mode="same")
    smooth -= smooth.mean(axis=0)
    std = smooth.std(axis=0)
    std[std == 0] = 1.0
    return smooth / std


def generate_synthetic_cohort(
    spec: HierarchySpec,
    n_subjects: int,
    grid: tuple[int, int],
    n_timepoints: int,
    noise_sigma: float,
    subject_jitter: float,
    seed: int,
) -> tuple[Cohort, SyntheticGroundTruth]:
    """Build a cohort with a planted multi-scale factorization.

    Parameters
    ----------
    spec : hierarchy whose K determines blob and merge-group counts.
    n_subjects, grid, n_timepoints : cohort dimensions (S = rows * cols).
    noise_sigma : noise standard deviation as a fraction of each subject's
        signal RMS; 0 yields exactly factorizable data.
    subject_jitter : probability in [0, 1] of toggling each boundary voxel
        of each blob per subject.
    seed : everything (placement, weights, jitter, courses, noise) derives
        from this.
    """
    rows, cols = int(grid[0]), int(grid[1])
    if rows < 1 or cols < 1:
        raise ConfigError(f"grid must be positive, got {rows}x{cols}")
    if n_subjects < 1:
        raise ConfigError("need at least one subject")
    if n_timepoints < 2:
        raise ConfigError("need at least two time points")
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be non-negative")
    if not 0 <= subject_jitter <= 1:
        raise ConfigError("subject_jitter must be in [0, 1]")
    s = rows * cols
    if spec.K[0] > min(n_timepoints, s):
        raise ConfigError(
            f"K_1={spec.K[0]} exceeds min(T={n_timepoints}, S={s})"
        )
    rng = np.random.default_rng(seed)

    v1, centers = _place_blobs(spec.K[0], rows, cols, rng)
    group_vt = [v1]
    for k_coarse in spec.K[1:]:
        m, centers = _merge_layer(k_coarse, centers, rng)
        group_vt.append(m)

    subject_ids = tuple(f"{i:03d}" for i in range(n_subjects))
    subject_vt1 = []
    subject_u = []
    data = []
    for i in range(n_subjects):
        if subject_jitter > 0:
            vt1 = _jitter_support(v1, rows, cols, subject_jitter, rng)
        else:
            vt1 = v1.copy()
        subject_vt1.append(vt1)
        u = _smooth_timecourses(n_timepoints, spec.K[-1], rng)
        v_full = chain_product([vt1, *group_vt[1:]][::-1])
        signal = u @ v_full
        # Pin each subject's clean signal to SIGNAL_RMS. The factor goes into
        # the time courses, which carry no normalization constraint, and the
        # signal is recomputed from the scaled courses so that X equals the
        # factor product bitwise at zero noise.
        rms = float(np.sqrt(np.mean(signal * signal)))
        if rms > 0:
            u = u * (SIGNAL_RMS / rms)
            signal = u @ v_full
        subject_u.append(u)
        x = signal
        if noise_sigma > 0:
            rms = float(np.sqrt(np.mean(signal * signal)))
            x = signal + rng.normal(0.0, noise_sigma * rms, size=signal.shape)
        data.append(x)

    cohort = Cohort(
        subjects=tuple(
            SubjectTimeseries(subject_id=sid, data=x)
            for sid, x in zip(subject_ids, data)
        ),
        graph=grid_graph(rows, cols),
    )
    truth = SyntheticGroundTruth(
        group_Vt=tuple(group_vt),
        subject_Vt1=tuple(subject_vt1),
        subject_U=tuple(subject_u),
        subject_ids=subject_ids,
        noise_sigma=float(noise_sigma),
        grid=(rows, cols),
    )
    return cohort, truth
