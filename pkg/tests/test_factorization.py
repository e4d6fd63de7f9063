import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import hierdmf as hd
from hierdmf.errors import ConfigError
from hierdmf.factorization import (
    chain_product,
    compute_group_aggregates,
    fit_timecourses,
    has_converged,
    normalize_rows_inf,
    objective,
    sparse_semi_nmf,
    split_signs,
    update_layer_deep,
    update_layer_finest,
)
from hierdmf.regularizers import RegularizationWeights, build_affinity
from helpers import result_from_truth


def test_split_signs_scalars():
    pos, neg = split_signs(np.array([[3.0, -3.0, 0.0]]))
    assert pos.tolist() == [[3.0, 0.0, 0.0]]
    assert neg.tolist() == [[0.0, 3.0, 0.0]]


def test_split_signs_no_overflow_near_float_max():
    big = np.array([[1.79e308, -1.79e308]])
    with np.errstate(over="raise"):
        pos, neg = split_signs(big)
    assert pos[0, 0] == 1.79e308 and neg[0, 1] == 1.79e308


@settings(max_examples=80)
@given(
    hnp.arrays(
        dtype=np.float64,
        shape=st.tuples(st.integers(1, 5), st.integers(1, 5)),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
)
def test_split_signs_reconstruction_exact(m):
    pos, neg = split_signs(m)
    assert np.all(pos >= 0) and np.all(neg >= 0)
    assert np.array_equal(pos - neg, m)
    assert np.all((pos * neg) == 0)


def test_chain_product_folds_fine_end_first():
    v1 = np.arange(12.0).reshape(4, 3)
    v2 = np.array([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]])
    v3 = np.array([[1.0, 1.0]])
    assert np.array_equal(chain_product([v1]), v1)
    assert np.array_equal(chain_product([v2, v1]), v2 @ v1)
    # nesting: collapsing [v3, v2, v1] equals v3 @ (v2 @ v1) bitwise
    assert chain_product([v3, v2, v1]).tobytes() == (v3 @ chain_product([v2, v1])).tobytes()


def test_fit_timecourses_identity_map():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 4))
    u = fit_timecourses(x, [np.eye(4)])
    assert np.max(np.abs(u - x)) <= 1e-12


def test_fit_timecourses_orthonormal_rows():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.standard_normal((10, 3)))
    v = q.T  # 3 x 10, orthonormal rows
    x = rng.standard_normal((7, 10))
    u = fit_timecourses(x, [v])
    assert np.max(np.abs(u - x @ v.T)) <= 1e-10


def test_fit_timecourses_matches_normal_equations():
    rng = np.random.default_rng(2)
    v = rng.uniform(0.1, 1.0, size=(5, 30))
    x = rng.standard_normal((20, 30))
    u = fit_timecourses(x, [v])
    u_ne = (x @ v.T) @ np.linalg.inv(v @ v.T)
    assert np.max(np.abs(u - u_ne)) <= 1e-10 * max(1.0, np.max(np.abs(u_ne)))


def test_fit_timecourses_residual_orthogonality():
    rng = np.random.default_rng(3)
    for trial in range(20):
        t, s = rng.integers(8, 40), rng.integers(10, 50)
        k = int(rng.integers(1, min(t, s) // 2 + 1))
        x = rng.standard_normal((t, s))
        v = rng.uniform(size=(k, s))
        u = fit_timecourses(x, [v])
        resid = (x - u @ v) @ v.T
        bound = 1e-8 * np.max(np.abs(x)) * np.max(np.abs(v))
        assert np.max(np.abs(resid)) <= bound, f"trial {trial}"


def test_group_aggregates_single_and_identical_pair():
    rng = np.random.default_rng(4)
    v = rng.uniform(size=(3, 5))
    single = compute_group_aggregates([v])
    assert np.array_equal(single.g, v)
    pair = compute_group_aggregates([v, v])
    assert np.max(np.abs(pair.g - np.sqrt(2.0) * v)) <= 1e-14
    # direct elementwise recomputation
    manual = np.sqrt(v**2 + v**2)
    assert np.max(np.abs(pair.g - manual)) <= 1e-14


def _stationary_instance(seed, k=4, t=12, s=10):
    rng = np.random.default_rng(seed)
    v, _ = normalize_rows_inf(rng.uniform(0.1, 1.0, size=(k, s)))
    u = rng.standard_normal((t, k))
    x = u @ v
    return x, u, v


def test_update_finest_fixed_at_stationary_point():
    x, u, v = _stationary_instance(5)
    agg = compute_group_aggregates([v])
    out = update_layer_finest(v, u, x, None, agg, 0.0, 0.0)
    assert np.max(np.abs(out - v)) <= 1e-12


def test_update_deep_fixed_at_stationary_point():
    rng = np.random.default_rng(6)
    vbar, _ = normalize_rows_inf(rng.uniform(0.1, 1.0, size=(5, 12)))
    v2 = np.ones((2, 5))
    q, _ = np.linalg.qr(rng.standard_normal((9, 2)))
    u = 10.0 * q
    x = u @ (v2 @ vbar)
    agg = compute_group_aggregates([v2])
    out = update_layer_deep(v2, u, x, vbar, agg, 0.0)
    assert np.max(np.abs(out - v2)) <= 1e-12


def test_updates_keep_zeros_and_nonnegativity():
    rng = np.random.default_rng(7)
    v = rng.uniform(size=(4, 8))
    v[v < 0.4] = 0.0
    u = rng.standard_normal((10, 4))
    x = rng.standard_normal((10, 8))
    agg = compute_group_aggregates([v])
    out = update_layer_finest(v, u, x, None, agg, 2.0, 0.0)
    assert np.all(out >= 0)
    assert np.all(out[v == 0] == 0.0)

    vbar = rng.uniform(size=(8, 15))
    x2 = rng.standard_normal((10, 15))
    out2 = update_layer_deep(v, u, x2, vbar, agg, 2.0)
    assert np.all(out2 >= 0)
    assert np.all(out2[v == 0] == 0.0)


def test_finest_update_descends_data_fit():
    # single subject, lambda at the default data-size scaling
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 30)) * 2
    lam_c = 1.0 * 1 * 20 / 5
    v, _ = normalize_rows_inf(rng.uniform(size=(5, 30)))
    fits = []
    for _ in range(50):
        u = fit_timecourses(x, [v])
        agg = compute_group_aggregates([v])
        v = update_layer_finest(v, u, x, None, agg, lam_c, 0.0)
        v, _ = normalize_rows_inf(v)
        u = fit_timecourses(x, [v])
        fits.append(float(np.sum((x - u @ v) ** 2)))
    for prev, curr in zip(fits, fits[1:]):
        assert curr <= prev + 1e-6 * max(abs(prev), 1.0)


def test_deep_update_descends_reconstruction_error():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((24, 40))
    v1, _ = normalize_rows_inf(rng.uniform(size=(8, 40)))
    v2, _ = normalize_rows_inf(rng.uniform(size=(3, 8)))
    errs = []
    for _ in range(50):
        u2 = fit_timecourses(x, [v2, v1])
        agg = compute_group_aggregates([v2])
        v2 = update_layer_deep(v2, u2, x, v1, agg, 0.0)
        v2, _ = normalize_rows_inf(v2)
        u2 = fit_timecourses(x, [v2, v1])
        errs.append(float(np.linalg.norm(x - u2 @ v2 @ v1)))
    for prev, curr in zip(errs, errs[1:]):
        assert curr <= prev + 1e-6 * max(abs(prev), 1.0)


def test_normalize_rows_inf_worked_example():
    v = np.array([[0.2, 0.8, 0.4]])
    out, scales = normalize_rows_inf(v)
    assert out.tolist() == [[0.25, 1.0, 0.5]]
    assert scales.tolist() == [0.8]


def test_normalize_rows_inf_zero_row_and_idempotence():
    v = np.array([[0.0, 0.0], [0.5, 2.0]])
    out, scales = normalize_rows_inf(v)
    assert out[0].tolist() == [0.0, 0.0]
    assert scales.tolist() == [1.0, 2.0]
    again, second = normalize_rows_inf(out)
    assert again.tobytes() == out.tobytes()
    assert np.all(second == 1.0)


@settings(max_examples=60)
@given(
    hnp.arrays(
        dtype=np.float64,
        shape=st.tuples(st.integers(1, 5), st.integers(1, 6)),
        elements=st.floats(0, 1e6, allow_nan=False, width=64),
    )
)
def test_normalize_rows_inf_idempotent_property(v):
    out, _ = normalize_rows_inf(v)
    sup = np.max(out, axis=1)
    assert np.all((sup == 0.0) | (sup == 1.0))
    again, rescale = normalize_rows_inf(out)
    assert again.tobytes() == out.tobytes()
    assert np.all(rescale == 1.0)


def test_objective_zero_at_ground_truth(tiny_truth_run):
    spec, cohort, truth = tiny_truth_run
    result = result_from_truth(cohort, truth, spec)
    # evaluate with the generating time courses, not refit ones
    stacks = tuple(
        hd.FactorStack(subject_id=st.subject_id, Vt=st.Vt, U=(st.U[0], truth.subject_U[i]))
        for i, st in enumerate(result.stacks)
    )
    weights = RegularizationWeights(lambda_c=(0.0, 0.0), lambda_m=0.0)
    breakdown = objective(cohort, stacks, weights)
    assert breakdown.fit == 0.0
    assert breakdown.total == 0.0


def test_objective_matches_naive_recomputation(noisy_cohort):
    spec, cohort, truth = noisy_cohort
    result = result_from_truth(cohort, truth, spec)
    weights = RegularizationWeights(lambda_c=(3.0, 5.0), lambda_m=2.0)
    ops = [build_affinity(s, cohort.graph) for s in cohort.subjects]
    breakdown = objective(cohort, result.stacks, weights, ops_per_subject=ops)

    from hierdmf.regularizers import graph_reg_value, group_sparsity_value

    fit = sum(
        float(np.sum((s.data - st.U[-1] @ chain_product(list(st.Vt)[::-1])) ** 2))
        for s, st in zip(cohort.subjects, result.stacks)
    )
    sparsity = sum(
        w * group_sparsity_value([st.Vt[j] for st in result.stacks])
        for j, w in enumerate(weights.lambda_c)
    )
    graph = weights.lambda_m * sum(
        graph_reg_value(st.Vt[0], op) for st, op in zip(result.stacks, ops)
    )
    assert breakdown.fit == pytest.approx(fit, rel=1e-10)
    assert breakdown.sparsity == pytest.approx(sparsity, rel=1e-10)
    assert breakdown.graph == pytest.approx(graph, rel=1e-10)
    assert breakdown.total == pytest.approx(fit + sparsity + graph, rel=1e-12)
    assert breakdown.total == breakdown.fit + breakdown.sparsity + breakdown.graph


def test_sparse_semi_nmf_recovers_exact_factorization():
    rng = np.random.default_rng(9)
    u0 = rng.standard_normal((30, 4))
    v0, _ = normalize_rows_inf(rng.uniform(size=(4, 20)))
    y = u0 @ v0
    u, v = sparse_semi_nmf(y, 4, lam_sparsity=0.0, seed=1)
    assert np.linalg.norm(y - u @ v) / np.linalg.norm(y) <= 0.05
    assert np.all(v >= 0)
    sup = v.max(axis=1)
    assert np.all((sup == 0.0) | (sup == 1.0))


def test_sparse_semi_nmf_rank_one():
    rng = np.random.default_rng(9)
    uvec = rng.uniform(1, 2, size=15)
    vvec = rng.uniform(size=25)
    u, v = sparse_semi_nmf(np.outer(uvec, vvec), 1, lam_sparsity=0.0, seed=0)
    assert np.corrcoef(v[0], vvec)[0, 1] >= 0.999


def test_sparse_semi_nmf_deterministic():
    rng = np.random.default_rng(12)
    y = rng.standard_normal((16, 12))
    a = sparse_semi_nmf(y, 3, lam_sparsity=0.5, seed=7)
    b = sparse_semi_nmf(y, 3, lam_sparsity=0.5, seed=7)
    assert a[0].tobytes() == b[0].tobytes()
    assert a[1].tobytes() == b[1].tobytes()


def test_sparse_semi_nmf_rejects_bad_rank_or_init():
    y = np.zeros((5, 6))
    with pytest.raises(ConfigError):
        sparse_semi_nmf(y, 0)
    with pytest.raises(ConfigError):
        sparse_semi_nmf(y, 6)
    with pytest.raises(ConfigError):
        sparse_semi_nmf(y, 2, init=np.ones((3, 6)))


def test_sparse_semi_nmf_init_zeros_stay_zero():
    rng = np.random.default_rng(13)
    y = rng.standard_normal((10, 8))
    init = rng.uniform(size=(2, 8))
    init[0, :4] = 0.0
    _, v = sparse_semi_nmf(y, 2, seed=0, iters=25, init=init)
    assert np.all(v[0, :4] == 0.0)


def test_has_converged_disabled_at_zero_tol():
    assert not has_converged(10.0, 10.0, 0.0)
    assert has_converged(10.0, 10.0 - 1e-9, 1e-6)
