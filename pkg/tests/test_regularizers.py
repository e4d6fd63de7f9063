import numpy as np
import pytest

import hierdmf as hd
from hierdmf.errors import ConfigError
from hierdmf.regularizers import (
    build_affinity,
    graph_reg_value,
    group_sparsity_value,
    regularization_weights,
)


def _path_graph(n):
    return hd.NeighborGraph(
        node_count=n, edges=np.array([(i, i + 1) for i in range(n - 1)])
    )


def _subject(data, sid="s"):
    return hd.SubjectTimeseries(subject_id=sid, data=data)


def test_affinity_of_identical_negated_and_constant_columns():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(30)
    data = np.column_stack([a, a, -a, np.full(30, 2.5)])
    ops = build_affinity(_subject(data), _path_graph(4))
    w = ops.affinity
    assert w[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert w[1, 2] == pytest.approx(0.0, abs=1e-12)
    # correlation against a constant column is defined as zero
    assert w[2, 3] == 0.5


def test_affinity_range_symmetry_and_support():
    rng = np.random.default_rng(4)
    graph = hd.grid_graph(3, 3)
    ops = build_affinity(_subject(rng.standard_normal((20, 9))), graph)
    w = ops.affinity.toarray()
    assert np.all(w >= 0) and np.all(w <= 1)
    assert np.array_equal(w, w.T)
    assert np.all(np.diag(w) == 0)
    edge_set = {tuple(e) for e in graph.edges.tolist()}
    for i in range(9):
        for j in range(i + 1, 9):
            if (i, j) not in edge_set:
                assert w[i, j] == 0


def test_affinity_rejects_voxel_count_mismatch():
    with pytest.raises(hd.ValidationError, match="voxels"):
        build_affinity(_subject(np.zeros((5, 3))), _path_graph(4))


def test_laplacian_rows_sum_to_zero_and_psd():
    rng = np.random.default_rng(9)
    ops = build_affinity(
        _subject(rng.standard_normal((15, 20))), hd.grid_graph(4, 5)
    )
    lap = ops.laplacian.toarray()
    assert np.max(np.abs(lap.sum(axis=1))) < 1e-10
    for _ in range(1000):
        x = rng.standard_normal(20)
        assert x @ (lap @ x) >= -1e-10


def test_graph_reg_constant_map_costs_nothing():
    rng = np.random.default_rng(2)
    ops = build_affinity(_subject(rng.standard_normal((10, 9))), hd.grid_graph(3, 3))
    v = np.tile(np.linspace(0.5, 1.0, 4)[:, None], (1, 9))
    assert graph_reg_value(v, ops) == pytest.approx(0.0, abs=1e-15)


def test_graph_reg_single_edge_unit_difference():
    data = np.column_stack([np.sin(np.linspace(0, 6, 12))] * 2)
    ops = build_affinity(_subject(data), _path_graph(2))
    v = np.array([[1.0, 0.0]])
    # identical columns give weight 1; the squared map difference is 1
    assert graph_reg_value(v, ops) == pytest.approx(1.0, abs=1e-12)


def test_graph_reg_matches_pairwise_and_trace_forms():
    rng = np.random.default_rng(3)
    ops = build_affinity(_subject(rng.standard_normal((18, 12))), hd.grid_graph(3, 4))
    v = rng.uniform(size=(3, 12))
    w = ops.affinity.toarray()
    pairwise = 0.0
    for a in range(12):
        for b in range(12):
            pairwise += 0.5 * w[a, b] * np.sum((v[:, a] - v[:, b]) ** 2)
    trace = np.trace(v @ ops.laplacian.toarray() @ v.T)
    value = graph_reg_value(v, ops)
    assert value == pytest.approx(pairwise, rel=1e-12)
    assert value == pytest.approx(trace, rel=1e-12)


def test_group_sparsity_known_values():
    # one subject, one row, exactly one nonzero entry: ratio is 1
    assert group_sparsity_value([np.array([[0.0, 3.0]])]) == pytest.approx(1.0)
    # one row with 4 equal entries: 4c / (2c) = sqrt(4)
    assert group_sparsity_value([np.full((1, 4), 0.7)]) == pytest.approx(2.0, abs=1e-12)


def test_group_sparsity_scale_invariance():
    rng = np.random.default_rng(5)
    vts = [rng.uniform(0.1, 1.0, size=(4, 6)) for _ in range(3)]
    base = group_sparsity_value(vts)
    scaled = group_sparsity_value([3.0 * v for v in vts])
    assert scaled == pytest.approx(base, rel=1e-12)


def test_group_sparsity_row_terms_bounded():
    rng = np.random.default_rng(6)
    k, s = 5, 8
    vts = [rng.uniform(size=(k, s)) for _ in range(3)]
    total = group_sparsity_value(vts)
    assert k <= total <= k * np.sqrt(s)
    for row in range(k):
        term = group_sparsity_value([v[row : row + 1] for v in vts])
        assert 1.0 <= term <= np.sqrt(s) + 1e-12


def test_group_sparsity_direct_formula():
    rng = np.random.default_rng(8)
    vts = [rng.uniform(size=(5, 7)) for _ in range(4)]
    manual = 0.0
    for k in range(5):
        pooled = np.sqrt(sum(v[k] ** 2 for v in vts))
        manual += pooled.sum() / np.sqrt(np.sum(pooled**2))
    assert group_sparsity_value(vts) == pytest.approx(manual, rel=1e-12)


def test_group_sparsity_zero_row_contributes_zero():
    vts = [np.zeros((2, 3)), np.zeros((2, 3))]
    assert group_sparsity_value(vts) == 0.0


def test_weights_worked_example():
    spec = hd.HierarchySpec(K=(10, 5), alpha=1.0, beta=10.0)
    complete5 = hd.NeighborGraph(
        node_count=5,
        edges=np.array([(a, b) for a in range(5) for b in range(a + 1, 5)]),
    )
    assert complete5.mean_degree == 4.0
    w = regularization_weights(spec, n_subjects=2, n_timepoints=100, graph=complete5)
    assert w.lambda_c[0] == 20.0
    assert w.lambda_c[1] == 40.0
    assert w.lambda_m == 25.0


def test_weights_zero_coefficients():
    spec = hd.HierarchySpec(K=(10, 5), alpha=0.0, beta=0.0)
    w = regularization_weights(spec, n_subjects=3, n_timepoints=50, graph=_path_graph(4))
    assert w.lambda_c == (0.0, 0.0)
    assert w.lambda_m == 0.0


def test_weights_reject_edgeless_graph_with_positive_beta():
    edgeless = hd.NeighborGraph(node_count=4, edges=np.zeros((0, 2), dtype=int))
    spec = hd.HierarchySpec(K=(4, 2), beta=1.0)
    with pytest.raises(ConfigError):
        regularization_weights(spec, n_subjects=1, n_timepoints=10, graph=edgeless)
    spec0 = hd.HierarchySpec(K=(4, 2), beta=0.0)
    w = regularization_weights(spec0, n_subjects=1, n_timepoints=10, graph=edgeless)
    assert w.lambda_m == 0.0
