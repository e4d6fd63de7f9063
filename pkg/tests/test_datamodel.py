import numpy as np
import pytest

import hierdmf as hd
from hierdmf.errors import ValidationError
from helpers import random_cohort


def test_subject_arrays_are_read_only():
    sub = hd.SubjectTimeseries(subject_id="a", data=np.zeros((3, 4)))
    with pytest.raises(ValueError):
        sub.data[0, 0] = 1.0


def test_subject_needs_two_timepoints():
    with pytest.raises(ValidationError):
        hd.SubjectTimeseries(subject_id="a", data=np.zeros((1, 4)))
    with pytest.raises(ValidationError):
        hd.SubjectTimeseries(subject_id="a", data=np.zeros(4))


def test_graph_canonicalizes_edges():
    g = hd.NeighborGraph(node_count=4, edges=np.array([[2, 1], [0, 3], [0, 1]]))
    assert g.edges.tolist() == [[0, 1], [0, 3], [1, 2]]


def test_graph_rejects_self_loops_duplicates_range():
    with pytest.raises(ValidationError):
        hd.NeighborGraph(node_count=3, edges=np.array([[1, 1]]))
    with pytest.raises(ValidationError):
        hd.NeighborGraph(node_count=3, edges=np.array([[0, 1], [1, 0]]))
    with pytest.raises(ValidationError):
        hd.NeighborGraph(node_count=3, edges=np.array([[0, 3]]))


def test_graph_degrees():
    g = hd.grid_graph(2, 2)
    assert g.degrees().tolist() == [2, 2, 2, 2]
    assert g.mean_degree == 2.0


def test_grid_graph_matches_hand_enumeration():
    rows, cols = 3, 4
    g = hd.grid_graph(rows, cols)
    expected = set()
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                expected.add((v, v + 1))
            if r + 1 < rows:
                expected.add((v, v + cols))
    assert {tuple(e) for e in g.edges.tolist()} == expected
    assert g.node_count == 12


def test_cohort_must_not_be_empty():
    with pytest.raises(ValidationError):
        hd.Cohort(subjects=(), graph=hd.grid_graph(2, 2))


def test_cohort_properties():
    cohort = random_cohort(n=3, t=10, grid=(3, 3))
    assert cohort.n_subjects == 3
    assert cohort.n_timepoints == 10
    assert cohort.n_voxels == 9
    assert cohort.subject_ids == ("000", "001", "002")


def test_validate_cohort_passes_on_clean_data():
    hd.validate_cohort(random_cohort())


def test_validate_cohort_names_offending_subject():
    g = hd.grid_graph(2, 2)
    subs = (
        hd.SubjectTimeseries(subject_id="ok", data=np.zeros((5, 4))),
        hd.SubjectTimeseries(subject_id="short", data=np.zeros((5, 3))),
    )
    with pytest.raises(ValidationError, match="short"):
        hd.validate_cohort(hd.Cohort(subjects=subs, graph=g))


def test_validate_cohort_locates_nan():
    data = np.zeros((5, 4))
    data[2, 3] = np.nan
    cohort = hd.Cohort(
        subjects=(hd.SubjectTimeseries(subject_id="s0", data=data),),
        graph=hd.grid_graph(2, 2),
    )
    with pytest.raises(ValidationError) as err:
        hd.validate_cohort(cohort)
    msg = str(err.value)
    assert "s0" in msg and "2" in msg and "3" in msg


def test_hierarchy_spec_orders_and_coerces():
    spec = hd.HierarchySpec(K=(10.0, 5, 2))
    assert spec.K == (10, 5, 2)
    assert spec.h == 3
    assert all(isinstance(k, int) for k in spec.K)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"K": (5, 5)},
        {"K": (2, 5)},
        {"K": ()},
        {"K": (5, 2), "alpha": -1.0},
        {"K": (5, 2), "beta": -0.5},
        {"K": (5, 2), "rel_tol": -1e-9},
        {"K": (5, 2), "max_outer_iters": -1},
    ],
)
def test_hierarchy_spec_rejects_bad_values(kwargs):
    with pytest.raises((ValidationError, hd.ConfigError)):
        hd.HierarchySpec(**kwargs)


def _stack(vt_rows):
    vt = np.asarray(vt_rows, dtype=float)
    u = np.zeros((4, vt.shape[0]))
    return hd.FactorStack(subject_id="x", Vt=(vt,), U=(u,))


def test_factor_stack_validate_accepts_sup_normalized():
    _stack([[0.5, 1.0, 0.0], [0.0, 0.0, 0.0]]).validate()


def test_factor_stack_validate_flags_bad_sup_norm():
    stack = _stack([[0.5, 0.9, 0.0]])
    with pytest.raises(ValidationError, match="sup-norm"):
        stack.validate()


def test_factor_stack_validate_flags_negative_entries():
    stack = _stack([[1.0, -0.1, 0.0]])
    with pytest.raises(ValidationError):
        stack.validate()


def test_factor_stack_requires_matching_lengths():
    vt = np.array([[1.0, 0.0]])
    with pytest.raises(ValidationError):
        hd.FactorStack(subject_id="x", Vt=(vt,), U=())


def test_truth_scale_maps_are_chained_products(tiny_truth_run):
    _, _, truth = tiny_truth_run
    v1 = truth.subject_Vt1[0]
    v2 = truth.group_Vt[1]
    assert truth.subject_scale_map(0, 1).tobytes() == v1.tobytes()
    manual = v2 @ v1
    assert np.array_equal(truth.subject_scale_map(0, 2), manual)
    assert np.array_equal(truth.group_scale_map(2), v2 @ truth.group_Vt[0])
