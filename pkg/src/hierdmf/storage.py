"""On-disk formats: DMAT matrices, edge lists, cohort and ground-truth
directories.

DMAT layout: bytes 0-3 ASCII magic "DMF1", bytes 4-7 row count (little
endian uint32), bytes 8-11 column count (little endian uint32), bytes
12-15 reserved and zero, then rows*cols float64 values, row-major, little
endian. Round-trips are bit exact, including negative zero and subnormals.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .datamodel import Cohort, NeighborGraph, SubjectTimeseries, SyntheticGroundTruth
from .errors import FormatError, ValidationError

DMAT_MAGIC = b"DMF1"
_HEADER = struct.Struct("<4sII4s")


def store_matrix(matrix: np.ndarray, path: str | Path) -> None:
    """Write a 2-D float64 matrix to ``path`` in DMAT format."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValidationError(f"can only store 2-D matrices, got ndim={m.ndim}")
    rows, cols = m.shape
    if rows >= 2**32 or cols >= 2**32:
        raise FormatError(f"matrix dimensions {rows}x{cols} overflow the header")
    payload = np.ascontiguousarray(m, dtype="<f8").tobytes()
    header = _HEADER.pack(DMAT_MAGIC, rows, cols, b"\x00" * 4)
    Path(path).write_bytes(header + payload)


def load_matrix(path: str | Path) -> np.ndarray:
    """Read a DMAT file back into a float64 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, rows, cols, reserved = _HEADER.unpack_from(raw)
    if magic != DMAT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DMAT_MAGIC!r}")
    if reserved != b"\x00" * 4:
        raise FormatError(f"{path}: reserved header bytes are not zero")
    expected = _HEADER.size + rows * cols * 8
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {rows * cols * 8} for {rows}x{cols}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return flat.reshape(rows, cols).astype(np.float64, copy=True)


def store_edges(graph: NeighborGraph, path: str | Path) -> None:
    """Write one "a b" line per undirected edge (0-based node indices)."""
    lines = [f"{a} {b}" for a, b in graph.edges]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_edges(path: str | Path, node_count: int) -> NeighborGraph:
    """Parse an edge-list file. Blank lines and '#' comments are skipped."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'a b', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer endpoint in {line!r}")
        edges.append((a, b))
    return NeighborGraph(node_count=node_count, edges=np.array(edges, dtype=np.int64).reshape(-1, 2))


def _write_meta(path: Path, items: list[tuple[str, str]]) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in items))


def _read_meta(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = text.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def save_cohort(cohort: Cohort, out_dir: str | Path, grid: tuple[int, int] | None = None) -> None:
    """Write subject_<id>.dmat files, graph.edges, and cohort.meta."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for sub in cohort.subjects:
        store_matrix(sub.data, d / f"subject_{sub.subject_id}.dmat")
    store_edges(cohort.graph, d / "graph.edges")
    items = [
        ("n", str(cohort.n_subjects)),
        ("T", str(cohort.n_timepoints)),
        ("S", str(cohort.n_voxels)),
    ]
    if grid is not None:
        items.append(("grid", f"{grid[0]}x{grid[1]}"))
    _write_meta(d / "cohort.meta", items)


def parse_grid(text: str) -> tuple[int, int]:
    for sep in ("x", ",", " "):
        if sep in text:
            a, _, b = text.partition(sep)
            try:
                return int(a.strip()), int(b.strip())
            except ValueError:
                break
    raise FormatError(f"cannot parse grid {text!r}, expected ROWSxCOLS")


def load_cohort(cohort_dir: str | Path) -> tuple[Cohort, dict[str, str]]:
    """Load a cohort directory; returns the cohort and its meta mapping."""
    d = Path(cohort_dir)
    meta_path = d / "cohort.meta"
    if not meta_path.exists():
        raise FormatError(f"{d}: missing cohort.meta")
    meta = _read_meta(meta_path)
    for key in ("n", "T", "S"):
        if key not in meta:
            raise FormatError(f"{meta_path}: missing key {key!r}")
    n, t, s = int(meta["n"]), int(meta["T"]), int(meta["S"])
    paths = sorted(d.glob("subject_*.dmat"))
    if len(paths) != n:
        raise FormatError(f"{d}: cohort.meta says n={n} but found {len(paths)} subject files")
    subjects = []
    for p in paths:
        sid = p.stem[len("subject_"):]
        data = load_matrix(p)
        if data.shape != (t, s):
            raise FormatError(
                f"{p}: shape {data.shape} does not match cohort.meta ({t}, {s})"
            )
        subjects.append(SubjectTimeseries(subject_id=sid, data=data))
    graph = load_edges(d / "graph.edges", node_count=s)
    return Cohort(subjects=tuple(subjects), graph=graph), meta


def save_truth(truth: SyntheticGroundTruth, out_dir: str | Path) -> None:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for j, v in enumerate(truth.group_Vt, start=1):
        store_matrix(v, d / f"truth_group_Vt_{j}.dmat")
    for sid, v1, u in zip(truth.subject_ids, truth.subject_Vt1, truth.subject_U):
        store_matrix(v1, d / f"truth_Vt1_{sid}.dmat")
        store_matrix(u, d / f"truth_U_{sid}.dmat")
    _write_meta(
        d / "truth.meta",
        [
            ("h", str(truth.n_scales)),
            ("n", str(truth.n_subjects)),
            ("subjects", ",".join(truth.subject_ids)),
            ("noise_sigma", repr(float(truth.noise_sigma))),
            ("grid", f"{truth.grid[0]}x{truth.grid[1]}"),
        ],
    )


def load_truth(truth_dir: str | Path) -> SyntheticGroundTruth:
    d = Path(truth_dir)
    meta = _read_meta(d / "truth.meta")
    h = int(meta["h"])
    ids = tuple(meta["subjects"].split(","))
    group = [load_matrix(d / f"truth_group_Vt_{j}.dmat") for j in range(1, h + 1)]
    v1 = [load_matrix(d / f"truth_Vt1_{sid}.dmat") for sid in ids]
    u = [load_matrix(d / f"truth_U_{sid}.dmat") for sid in ids]
    return SyntheticGroundTruth(
        group_Vt=tuple(group),
        subject_Vt1=tuple(v1),
        subject_U=tuple(u),
        subject_ids=ids,
        noise_sigma=float(meta["noise_sigma"]),
        grid=parse_grid(meta["grid"]),
    )
