import struct

import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import hierdmf as hd
from hierdmf.errors import FormatError, ValidationError
from hierdmf.storage import (
    load_cohort,
    load_edges,
    load_matrix,
    load_truth,
    parse_grid,
    save_cohort,
    save_truth,
    store_edges,
    store_matrix,
)
from helpers import random_cohort


finite64 = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    hnp.arrays(
        dtype=np.float64,
        shape=st.tuples(st.integers(1, 7), st.integers(1, 7)),
        elements=finite64,
    )
)
def test_matrix_round_trip_bit_exact(tmp_path, m):
    path = tmp_path / "m.dmat"
    store_matrix(m, path)
    back = load_matrix(path)
    assert back.shape == m.shape
    # bit-for-bit, including signed zeros and subnormals
    assert back.tobytes() == m.tobytes()


def test_matrix_one_by_one_layout(tmp_path):
    path = tmp_path / "one.dmat"
    store_matrix(np.array([[0.0]]), path)
    raw = path.read_bytes()
    assert len(raw) == 24
    magic, rows, cols, reserved = struct.unpack("<4sII4s", raw[:16])
    assert magic == b"DMF1"
    assert (rows, cols) == (1, 1)
    assert reserved == b"\x00\x00\x00\x00"
    assert raw[16:] == struct.pack("<d", 0.0)


def test_matrix_rejects_non_2d(tmp_path):
    with pytest.raises(ValidationError):
        store_matrix(np.zeros(3), tmp_path / "v.dmat")


def test_matrix_bad_magic(tmp_path):
    path = tmp_path / "bad.dmat"
    store_matrix(np.ones((2, 2)), path)
    raw = bytearray(path.read_bytes())
    raw[0:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_matrix(path)


def test_matrix_truncated(tmp_path):
    path = tmp_path / "short.dmat"
    store_matrix(np.ones((2, 3)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_matrix(path)
    path.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        load_matrix(path)


def test_matrix_reserved_must_be_zero(tmp_path):
    path = tmp_path / "res.dmat"
    store_matrix(np.ones((1, 2)), path)
    raw = bytearray(path.read_bytes())
    raw[12] = 1
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_matrix(path)


def test_matrix_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "long.dmat"
    store_matrix(np.ones((1, 2)), path)
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(FormatError):
        load_matrix(path)


def test_edges_round_trip_and_comments(tmp_path):
    g = hd.grid_graph(3, 3)
    path = tmp_path / "g.edges"
    store_edges(g, path)
    text = path.read_text()
    path.write_text("# neighbor list\n" + text)
    back = load_edges(path, g.node_count)
    assert np.array_equal(back.edges, g.edges)
    assert back.node_count == g.node_count


def test_edges_malformed_line(tmp_path):
    path = tmp_path / "bad.edges"
    path.write_text("0 1\n2\n")
    with pytest.raises(FormatError):
        load_edges(path, 4)


def test_edges_out_of_range(tmp_path):
    path = tmp_path / "oob.edges"
    path.write_text("0 9\n")
    with pytest.raises(ValidationError):
        load_edges(path, 4)


def test_cohort_round_trip(tmp_path):
    cohort = random_cohort(n=3, t=10, grid=(3, 4), seed=5)
    save_cohort(cohort, tmp_path, grid=(3, 4))
    back, meta = load_cohort(tmp_path)
    assert back.subject_ids == cohort.subject_ids
    for a, b in zip(back.subjects, cohort.subjects):
        assert a.data.tobytes() == b.data.tobytes()
    assert np.array_equal(back.graph.edges, cohort.graph.edges)
    assert meta["grid"] == "3x4"
    assert meta["n"] == "3"


def test_cohort_missing_meta(tmp_path):
    cohort = random_cohort(n=2, t=8, grid=(3, 3))
    save_cohort(cohort, tmp_path)
    (tmp_path / "cohort.meta").unlink()
    with pytest.raises(FormatError):
        load_cohort(tmp_path)


def test_cohort_subject_count_mismatch(tmp_path):
    cohort = random_cohort(n=2, t=8, grid=(3, 3))
    save_cohort(cohort, tmp_path)
    (tmp_path / "subject_001.dmat").unlink()
    with pytest.raises(FormatError):
        load_cohort(tmp_path)


def test_parse_grid_variants():
    assert parse_grid("6x6") == (6, 6)
    assert parse_grid("3,4") == (3, 4)
    assert parse_grid("10 12") == (10, 12)
    with pytest.raises(FormatError):
        parse_grid("6by6")


def test_truth_round_trip(tmp_path, tiny_truth_run):
    _, _, truth = tiny_truth_run
    save_truth(truth, tmp_path)
    back = load_truth(tmp_path)
    assert back.subject_ids == truth.subject_ids
    assert back.grid == truth.grid
    assert back.noise_sigma == truth.noise_sigma
    for j, (a, b) in enumerate(zip(back.group_Vt, truth.group_Vt)):
        assert a.tobytes() == b.tobytes(), f"group factor {j} changed"
    for a, b in zip(back.subject_Vt1, truth.subject_Vt1):
        assert a.tobytes() == b.tobytes()
    for a, b in zip(back.subject_U, truth.subject_U):
        assert a.tobytes() == b.tobytes()
