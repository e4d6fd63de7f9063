"""Activation-prediction evaluation and factor-recovery scoring.

Features for a subject are Fisher-transformed correlation maps between
that subject's per-scale time courses and its raw voxel series. A shared
parcellation (argmax of the cross-subject mean voxel-level map) defines
pooled per-parcel, per-event linear models; prediction quality is scored
by leave-one-subject-out correlation between predicted and observed
activation maps. Recovered factors are scored against ground truth after
Hungarian matching on row correlations, and paired feature sets are
compared with a Wilcoxon signed-rank test (exact for small samples).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import erfc, sqrt
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .datamodel import Cohort, SyntheticGroundTruth
from .errors import FormatError, ValidationError
from .pipeline import DecompositionResult

FISHER_CLAMP = 1e-7


def fc_map(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Pearson correlation of each time course against each voxel series.

    Returns a K x S matrix. Zero-variance columns on either side give 0.
    """
    if u.shape[0] != x.shape[0]:
        raise ValidationError(
            f"time dimension mismatch: U has {u.shape[0]} rows, X has {x.shape[0]}"
        )
    uc = u - u.mean(axis=0)
    xc = x - x.mean(axis=0)
    nu = np.sqrt(np.sum(uc * uc, axis=0))
    nx = np.sqrt(np.sum(xc * xc, axis=0))
    num = uc.T @ xc
    den = np.outer(nu, nx)
    r = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    np.clip(r, -1.0, 1.0, out=r)
    return r


def fisher_z(r: np.ndarray | float) -> np.ndarray | float:
    """atanh with inputs clamped to +-(1 - 1e-7) so the output stays finite."""
    clamped = np.clip(r, -1.0 + FISHER_CLAMP, 1.0 - FISHER_CLAMP)
    return np.arctanh(clamped)


def parcellate(mean_v1: np.ndarray) -> np.ndarray:
    """Assign each voxel to the component with the largest mean weight.

    Ties go to the lowest component index.
    """
    return np.argmax(mean_v1, axis=0)


def _pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    ac = a - a.mean()
    bc = b - b.mean()
    na = float(np.sqrt(np.sum(ac * ac)))
    nb = float(np.sqrt(np.sum(bc * bc)))
    if na == 0.0 or nb == 0.0:
        return 0.0, True
    r = float(np.dot(ac, bc) / (na * nb))
    return max(-1.0, min(1.0, r)), False


@dataclass(frozen=True)
class PredictionModel:
    """Per-parcel per-event linear coefficients (slopes then intercept)."""

    coefficients: np.ndarray  # (n_parcels, n_events, n_features + 1)
    empty_parcels: tuple[int, ...]


def train_predictors(
    features: Sequence[np.ndarray],
    activations: Sequence[np.ndarray],
    parcellation: np.ndarray,
    n_parcels: int,
) -> PredictionModel:
    """Fit one pooled linear model per (parcel, event).

    features[i] is an F x S matrix for training subject i; activations[i]
    is (n_events, S). Rows pool all training subjects' voxels within the
    parcel and include an intercept; coefficients come from minimum-norm
    least squares. An empty parcel falls back to the training-pool mean
    for each event and is reported in empty_parcels.
    """
    if not features:
        raise ValidationError("need at least one training subject")
    n_events = activations[0].shape[0]
    n_feat = features[0].shape[0]
    coef = np.zeros((n_parcels, n_events, n_feat + 1))
    empty = []
    pool_mean = np.mean(np.stack([a for a in activations]), axis=(0, 2))
    for p in range(n_parcels):
        cols = np.flatnonzero(parcellation == p)
        if cols.size == 0:
            empty.append(p)
            coef[p, :, -1] = pool_mean
            continue
        design = np.vstack(
            [np.hstack([f[:, cols].T, np.ones((cols.size, 1))]) for f in features]
        )
        target = np.vstack([a[:, cols].T for a in activations])
        sol, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
        coef[p] = sol.T
    return PredictionModel(coefficients=coef, empty_parcels=tuple(empty))


def predict_activations(
    model: PredictionModel, features: np.ndarray, parcellation: np.ndarray
) -> np.ndarray:
    """Apply per-parcel models to one subject's features; returns (E, S)."""
    n_parcels, n_events, _ = model.coefficients.shape
    s = features.shape[1]
    out = np.zeros((n_events, s))
    for p in range(n_parcels):
        cols = parcellation == p
        if not np.any(cols):
            continue
        c = model.coefficients[p]
        out[:, cols] = c[:, :-1] @ features[:, cols] + c[:, -1][:, None]
    return out


@dataclass(frozen=True)
class ReportRow:
    subject: str
    event: str
    feature_set: str
    r: float
    flagged: bool


@dataclass(frozen=True)
class PairedTest:
    a: str
    b: str
    statistic: float
    p_value: float
    flagged: bool


@dataclass(frozen=True)
class EvaluationReport:
    strategy: str
    subjects: tuple[str, ...]
    events: tuple[str, ...]
    feature_sets: tuple[tuple[str, tuple[int, ...]], ...]
    rows: tuple[ReportRow, ...]
    paired_tests: tuple[PairedTest, ...]

    def per_subject_mean(self, feature_set: str) -> dict[str, float]:
        out: dict[str, list[float]] = {s: [] for s in self.subjects}
        for row in self.rows:
            if row.feature_set == feature_set:
                out[row.subject].append(row.r)
        return {s: float(np.mean(v)) for s, v in out.items() if v}

    def mean_r(self, feature_set: str) -> float:
        vals = [row.r for row in self.rows if row.feature_set == feature_set]
        return float(np.mean(vals))

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "subjects": list(self.subjects),
            "events": list(self.events),
            "feature_sets": {name: list(scales) for name, scales in self.feature_sets},
            "rows": [
                {
                    "subject": r.subject,
                    "event": r.event,
                    "feature_set": r.feature_set,
                    "r": r.r,
                    "flagged": r.flagged,
                }
                for r in self.rows
            ],
            "aggregates": {
                name: {
                    "mean_r": self.mean_r(name),
                    "per_subject_mean": self.per_subject_mean(name),
                }
                for name, _ in self.feature_sets
            },
            "paired_tests": [
                {
                    "a": t.a,
                    "b": t.b,
                    "statistic": t.statistic,
                    "p": t.p_value,
                    "flagged": t.flagged,
                }
                for t in self.paired_tests
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
        )

    @staticmethod
    def load(path: str | Path) -> "EvaluationReport":
        payload = json.loads(Path(path).read_text())
        try:
            return EvaluationReport(
                strategy=payload["strategy"],
                subjects=tuple(payload["subjects"]),
                events=tuple(payload["events"]),
                feature_sets=tuple(
                    (name, tuple(scales))
                    for name, scales in sorted(payload["feature_sets"].items())
                ),
                rows=tuple(
                    ReportRow(
                        subject=r["subject"],
                        event=r["event"],
                        feature_set=r["feature_set"],
                        r=float(r["r"]),
                        flagged=bool(r["flagged"]),
                    )
                    for r in payload["rows"]
                ),
                paired_tests=tuple(
                    PairedTest(
                        a=t["a"],
                        b=t["b"],
                        statistic=float(t["statistic"]),
                        p_value=float(t["p"]),
                        flagged=bool(t["flagged"]),
                    )
                    for t in payload["paired_tests"]
                ),
            )
        except KeyError as exc:
            raise FormatError(f"{path}: missing report key {exc}")


def default_feature_sets(n_scales: int) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Single-scale sets s1..sh plus the all-scales set (when h > 1)."""
    sets: list[tuple[str, tuple[int, ...]]] = [
        (f"s{j}", (j,)) for j in range(1, n_scales + 1)
    ]
    if n_scales > 1:
        sets.append(("multi", tuple(range(1, n_scales + 1))))
    return tuple(sets)


def subject_features(
    cohort: Cohort, result: DecompositionResult, scales: Sequence[int]
) -> list[np.ndarray]:
    """Fisher-z correlation features per subject, scales stacked in order."""
    out = []
    for i in range(cohort.n_subjects):
        x = cohort.subjects[i].data
        blocks = [fisher_z(fc_map(result.timecourses(i, j), x)) for j in scales]
        out.append(np.vstack(blocks))
    return out


def loso_evaluate(
    cohort: Cohort,
    result: DecompositionResult,
    activations: Mapping[str, np.ndarray],
    events: Sequence[str],
    feature_sets: Sequence[tuple[str, Sequence[int]]] | None = None,
) -> EvaluationReport:
    """Leave-one-subject-out activation prediction.

    activations maps subject id to an (n_events, S) array aligned with
    `events`. For each feature set and each held-out subject, models are
    trained on the remaining subjects only; the held-out subject
    contributes its own features at prediction time. Degenerate predicted
    or observed maps score r = 0 and are flagged. Paired Wilcoxon tests
    compare per-subject mean r between every pair of feature sets.
    """
    if cohort.n_subjects < 2:
        raise ValidationError("leave-one-subject-out needs at least 2 subjects")
    for sid in cohort.subject_ids:
        if sid not in activations:
            raise ValidationError(f"missing activations for subject {sid}")
        a = activations[sid]
        if a.shape != (len(events), cohort.n_voxels):
            raise ValidationError(
                f"subject {sid}: activations shape {a.shape} does not match "
                f"({len(events)}, {cohort.n_voxels})"
            )
    if feature_sets is None:
        feature_sets = default_feature_sets(result.n_scales)
    sets = tuple((name, tuple(int(j) for j in scales)) for name, scales in feature_sets)
    for name, scales in sets:
        if any(j < 1 or j > result.n_scales for j in scales) or not scales:
            raise ValidationError(f"feature set {name!r} uses invalid scales {scales}")

    n = cohort.n_subjects
    n_parcels = result.spec.K[0]
    mean_v1 = np.mean([result.scale_map(i, 1) for i in range(n)], axis=0)
    parcels = parcellate(mean_v1)
    act = [np.asarray(activations[sid], dtype=np.float64) for sid in cohort.subject_ids]

    per_scale_feats = {
        j: subject_features(cohort, result, [j]) for j in range(1, result.n_scales + 1)
    }

    rows: list[ReportRow] = []
    for name, scales in sets:
        feats = [
            np.vstack([per_scale_feats[j][i] for j in scales]) for i in range(n)
        ]
        for held in range(n):
            train_idx = [i for i in range(n) if i != held]
            model = train_predictors(
                [feats[i] for i in train_idx],
                [act[i] for i in train_idx],
                parcels,
                n_parcels,
            )
            pred = predict_activations(model, feats[held], parcels)
            for e, event in enumerate(events):
                r, flagged = _pearson(pred[e], act[held][e])
                rows.append(
                    ReportRow(
                        subject=cohort.subject_ids[held],
                        event=event,
                        feature_set=name,
                        r=r,
                        flagged=flagged,
                    )
                )

    report = EvaluationReport(
        strategy=result.strategy,
        subjects=cohort.subject_ids,
        events=tuple(events),
        feature_sets=sets,
        rows=tuple(rows),
        paired_tests=(),
    )
    tests: list[PairedTest] = []
    for ia in range(len(sets)):
        for ib in range(ia + 1, len(sets)):
            name_a, name_b = sets[ia][0], sets[ib][0]
            ma = report.per_subject_mean(name_a)
            mb = report.per_subject_mean(name_b)
            va = np.array([ma[s] for s in cohort.subject_ids])
            vb = np.array([mb[s] for s in cohort.subject_ids])
            w = wilcoxon_signed_rank(va, vb)
            tests.append(
                PairedTest(
                    a=name_a,
                    b=name_b,
                    statistic=w.statistic,
                    p_value=w.p_value,
                    flagged=w.flagged,
                )
            )
    return EvaluationReport(
        strategy=report.strategy,
        subjects=report.subjects,
        events=report.events,
        feature_sets=report.feature_sets,
        rows=report.rows,
        paired_tests=tuple(tests),
    )


def match_components(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Hungarian matching of rows of a to rows of b by Pearson correlation.

    Returns (perm, mean_matched) where perm[k] is the row of b assigned to
    row k of a and mean_matched is the mean correlation over the matching
    that maximizes the total. Zero-variance rows correlate as 0.
    """
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    ac = a - a.mean(axis=1, keepdims=True)
    bc = b - b.mean(axis=1, keepdims=True)
    na = np.sqrt(np.sum(ac * ac, axis=1))
    nb = np.sqrt(np.sum(bc * bc, axis=1))
    num = ac @ bc.T
    den = np.outer(na, nb)
    corr = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    np.clip(corr, -1.0, 1.0, out=corr)
    row_ind, col_ind = linear_sum_assignment(corr, maximize=True)
    perm = np.empty(a.shape[0], dtype=np.int64)
    perm[row_ind] = col_ind
    score = float(np.mean(corr[np.arange(a.shape[0]), perm]))
    return perm, score


def recovery_score(
    result: DecompositionResult, truth: SyntheticGroundTruth, scale: int
) -> float:
    """Mean over subjects of the matched row correlation at one scale."""
    if scale < 1 or scale > result.n_scales:
        raise ValidationError(f"scale {scale} out of range 1..{result.n_scales}")
    scores = []
    for i in range(len(result.subject_ids)):
        est = result.scale_map(i, scale)
        ref = truth.subject_scale_map(i, scale)
        _, score = match_components(est, ref)
        scores.append(score)
    return float(np.mean(scores))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    flagged: bool
    n_nonzero: int
    method: str


def _exact_two_sided_p(doubled_ranks: np.ndarray, w2: int, n: int) -> float:
    """Exact two-sided p over all 2^n sign assignments via subset-sum counts.

    Ranks are doubled so tie-averaged half-integer ranks become integers;
    the distribution of the doubled positive-rank sum is built by dynamic
    programming, which reproduces exhaustive enumeration exactly (all
    probabilities are dyadic rationals).
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    denom = float(2**n)
    p_hi = float(counts[w2:].sum()) / denom
    p_lo = float(counts[: w2 + 1].sum()) / denom
    return min(1.0, 2.0 * min(p_hi, p_lo))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied magnitudes get average ranks. The
    statistic is the positive-rank sum. Up to 20 non-zero differences the
    p-value is exact over all sign assignments; beyond that a normal
    approximation with tie correction is used. All differences zero is
    degenerate: p = 1 with the flag set.
    """
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if d.size == 0:
        raise ValidationError("empty paired sample")
    nz = d[d != 0]
    n = nz.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, True, 0, "degenerate")
    ranks = rankdata(np.abs(nz))
    w_plus = float(np.sum(ranks[nz > 0]))
    if n <= 20:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(round(2.0 * w_plus))
        p = _exact_two_sided_p(doubled, w2, n)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(nz), return_counts=True)
        var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        z = (w_plus - mu) / sqrt(var)
        p = erfc(abs(z) / sqrt(2.0))
        p = min(1.0, max(p, 5e-324))
        method = "normal"
    return WilcoxonResult(w_plus, p, False, int(n), method)


def synthesize_linear_activations(
    cohort: Cohort,
    result: DecompositionResult,
    events: Sequence[str],
    seed: int,
    scales: Sequence[int] | None = None,
    coeff_range: tuple[float, float] = (0.5, 1.5),
) -> dict[str, np.ndarray]:
    """Activations that are exact linear functions of the features.

    Coefficients are constant within each parcel, drawn per (parcel,
    event, feature) with random sign and magnitude in coeff_range, and
    shared across subjects, so pooled per-parcel linear models can predict
    them perfectly from the same features.
    """
    if scales is None:
        scales = list(range(1, result.n_scales + 1))
    rng = np.random.default_rng(seed)
    n = cohort.n_subjects
    feats = subject_features(cohort, result, scales)
    n_feat = feats[0].shape[0]
    n_parcels = result.spec.K[0]
    mean_v1 = np.mean([result.scale_map(i, 1) for i in range(n)], axis=0)
    parcels = parcellate(mean_v1)
    magnitudes = rng.uniform(*coeff_range, size=(n_parcels, len(events), n_feat + 1))
    signs = rng.choice([-1.0, 1.0], size=magnitudes.shape)
    coef = magnitudes * signs
    out = {}
    for i, sid in enumerate(cohort.subject_ids):
        acts = np.zeros((len(events), cohort.n_voxels))
        for p in range(n_parcels):
            cols = parcels == p
            if not np.any(cols):
                continue
            acts[:, cols] = coef[p, :, :-1] @ feats[i][:, cols] + coef[p, :, -1][:, None]
        out[sid] = acts
    return out
