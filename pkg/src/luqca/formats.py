"""JSON model files, state snapshots and CSV tables.

Model documents carry ``"format": "luqca-model"``, a version and a
``"model"`` tag:

``qca``        explicit read/update matrices with layout and neighbourhood
``builder``    a named construction with its parameters
``cqca``       layout, colouring, phase operators and phase colours
``watrous``    partitioned automaton (sub-alphabet sizes and ``V``)
``margolus``   block scheme (dimension, alphabet, subsystem sizes, stage maps)
``universal``  universal two-dimensional automaton for a single-qubit gate set

Matrices are written either densely as ``{"shape", "dense"}`` with
``[re, im]`` pairs, or as ``{"shape", "sparse"}`` with ``[row, col, re, im]``
entries.  Python's float repr makes every round trip bit-exact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .core import (
    CellLayout,
    DefinitionError,
    LuqcaError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
    amplitude_cap,
)
from .state import RegionState, SparseState

MODEL_FORMAT = "luqca-model"
STATE_FORMAT = "luqca-state"
FORMAT_VERSION = 1
CSV_HEADER = "# luqca-csv v1"
DEFAULT_SNAPSHOT_THRESHOLD = 1e-12


class ModelFormatError(LuqcaError, ValueError):
    """A model or state document that cannot be parsed."""


# -- matrices -----------------------------------------------------------------------


def matrix_to_json(M, sparse: bool | None = None) -> dict:
    if sparse is None:
        sparse = sp.issparse(M)
    if sparse:
        C = sp.coo_matrix(M)
        entries = [[int(r), int(c), float(v.real), float(v.imag)]
                   for r, c, v in zip(C.row, C.col, C.data.astype(np.complex128))]
        return {"shape": list(C.shape), "sparse": entries}
    A = np.asarray(M, dtype=np.complex128)
    return {"shape": list(A.shape),
            "dense": [[[float(v.real), float(v.imag)] for v in row] for row in A]}


def matrix_from_json(data) -> np.ndarray | sp.csr_matrix:
    try:
        shape = tuple(int(x) for x in data["shape"])
        if "sparse" in data:
            rows = np.array(data["sparse"], dtype=np.float64).reshape(-1, 4)
            vals = rows[:, 2] + 1j * rows[:, 3]
            return sp.csr_matrix((vals, (rows[:, 0].astype(np.int64),
                                         rows[:, 1].astype(np.int64))), shape=shape)
        arr = np.array(data["dense"], dtype=np.float64)
        if arr.shape != shape + (2,):
            raise ModelFormatError(f"dense matrix does not match shape {shape}")
        return arr[..., 0] + 1j * arr[..., 1]
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad matrix entry: {exc}") from exc


def _complex_json(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _complex_from(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


# -- layouts and regions ---------------------------------------------------------------


def layout_to_json(layout: CellLayout) -> list[dict]:
    return [{"name": r.name, "dim": r.dim, "classical": r.classical} for r in layout.registers]


def layout_from_json(data) -> CellLayout:
    return CellLayout([Register(str(r["name"]), int(r["dim"]), bool(r.get("classical", False)))
                       for r in data])


def region_to_json(region: Region) -> dict:
    return {"lower": list(region.lower), "upper": list(region.upper),
            "boundary": region.boundary}


def region_from_json(data) -> Region:
    return Region(tuple(int(x) for x in data["lower"]), tuple(int(x) for x in data["upper"]),
                  str(data.get("boundary", "quiescent")))


def parse_region(text: str, boundary: str) -> Region:
    """``"8"`` (cells 0..7), ``"4x4"`` (a box) or ``"-3:5"`` (inclusive line)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return Region((lo,), (hi,), boundary)
        shape = tuple(int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ModelFormatError(f"cannot parse region {text!r}") from exc
    return Region.box(shape, boundary)


# -- models ------------------------------------------------------------------------------


def _builder_registry():
    from . import builders

    def walk(p=None, q=None, phi=(1.0, 0.0)):
        if p is None and q is None:
            return builders.walk_qca()
        return builders.walk_qca(builders.WalkParams(_complex_from(p), _complex_from(q),
                                                     _complex_from(phi)))

    def amplification(s=2, flip_set=(-2, -1, 0)):
        return builders.amplification_cqca(builders.AmplificationSpec(int(s), frozenset(flip_set)))

    def cnot_read():
        return cnot_read_fixture()

    return {
        "ising": lambda J=1.0, dt=0.1: builders.ising_qca(float(J), float(dt)),
        "heisenberg": lambda J=1.0, dt=0.1, k=1: builders.heisenberg_cqca(float(J), float(dt),
                                                                          int(k)),
        "walk": walk,
        "shift_right": lambda data_dim=2: builders.shift_right_qca(int(data_dim)),
        "amplification": amplification,
        "cnot_read": cnot_read,
    }


BUILDERS = ("ising", "heisenberg", "walk", "shift_right", "amplification", "cnot_read")


def cnot_read_fixture() -> QcaDefinition:
    """Read operator CNOT on neighbourhood {0, +1}: overlapping translates do not commute."""
    cnot = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
    return QcaDefinition(CellLayout.single(2), NeighborhoodScheme.interval(0, 1), cnot,
                         np.eye(2, dtype=np.complex128), quiescent=0, name="cnot-read")


@dataclass
class Model:
    """A parsed model document: its tag, the source object and its raw document."""

    kind: str
    definition: Any
    document: dict

    def to_qca(self) -> QcaDefinition:
        from .coloring import CqcaDefinition, cqca_to_qca
        from .translators import MargolusDef, WatrousPartitionedDef, margolus_to_luqca, \
            watrous_to_luqca

        d = self.definition
        if isinstance(d, QcaDefinition):
            return d
        if isinstance(d, CqcaDefinition):
            return cqca_to_qca(d)
        if isinstance(d, WatrousPartitionedDef):
            return watrous_to_luqca(d)
        if isinstance(d, MargolusDef):
            return margolus_to_luqca(d)
        raise DefinitionError(f"cannot convert {type(d).__name__} to a read/update automaton")


def model_to_json(obj, sparse: bool | None = None) -> dict:
    """Document for a definition object; rule-form automata are written as matrices when small."""
    from .coloring import CqcaDefinition
    from .translators import MargolusDef, WatrousPartitionedDef

    head = {"format": MODEL_FORMAT, "version": FORMAT_VERSION}
    if isinstance(obj, QcaDefinition):
        return {**head, "model": "qca", "name": obj.name,
                "layout": layout_to_json(obj.layout),
                "neighborhood": [list(o) for o in obj.neighborhood.offsets],
                "read": matrix_to_json(obj.read_matrix(sparse=bool(sparse)), sparse),
                "update": matrix_to_json(obj.update_matrix(sparse=bool(sparse)), sparse),
                "quiescent": obj.quiescent}
    if isinstance(obj, CqcaDefinition):
        from .operators import materialize

        n = obj.neighborhood.size
        ops = [materialize(op, obj.layout, n, sparse=True) for op in obj.operators]
        return {**head, "model": "cqca", "name": obj.name,
                "layout": layout_to_json(obj.layout), "coloring": obj.coloring.as_dict(),
                "operators": [matrix_to_json(op, sparse) for op in ops],
                "colors": list(obj.colors)}
    if isinstance(obj, WatrousPartitionedDef):
        return {**head, "model": "watrous", "dl": obj.dl, "dc": obj.dc, "dr": obj.dr,
                "V": matrix_to_json(obj.V, sparse)}
    if isinstance(obj, MargolusDef):
        return {**head, "model": "margolus", "d": obj.d, "sigma": obj.sigma,
                "dims": list(obj.dims), "U0": matrix_to_json(obj.U0, sparse),
                "U1": matrix_to_json(obj.U1, sparse)}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def builder_document(name: str, **params) -> dict:
    if name not in BUILDERS:
        raise ModelFormatError(f"unknown builder {name!r}")
    return {"format": MODEL_FORMAT, "version": FORMAT_VERSION, "model": "builder",
            "builder": name, "params": params}


def universal_document(gate_set: dict | None = None) -> dict:
    from .compiler import DEFAULT_GATE_SET

    gate_set = DEFAULT_GATE_SET if gate_set is None else gate_set
    return {"format": MODEL_FORMAT, "version": FORMAT_VERSION, "model": "universal",
            "gate_set": {k: matrix_to_json(v) for k, v in gate_set.items()}}


def model_from_json(doc: dict) -> Model:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a luqca model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    kind = doc.get("model")
    try:
        definition = _build(kind, doc)
    except (LuqcaError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"invalid {kind} model: {exc}") from exc
    return Model(kind, definition, doc)


def _build(kind, doc):
    if kind == "qca":
        layout = layout_from_json(doc["layout"])
        nb = NeighborhoodScheme(tuple(tuple(int(x) for x in o) for o in doc["neighborhood"]))
        q = doc.get("quiescent")
        return QcaDefinition(layout, nb, matrix_from_json(doc["read"]),
                             matrix_from_json(doc["update"]),
                             None if q is None else int(q), str(doc.get("name", "")))
    if kind == "builder":
        registry = _builder_registry()
        name = doc["builder"]
        if name not in registry:
            raise ModelFormatError(f"unknown builder {name!r}")
        return registry[name](**dict(doc.get("params", {})))
    if kind == "cqca":
        from .coloring import Coloring, CqcaDefinition

        return CqcaDefinition(layout_from_json(doc["layout"]), Coloring.from_dict(doc["coloring"]),
                              tuple(matrix_from_json(m) for m in doc["operators"]),
                              tuple(int(c) for c in doc["colors"]), str(doc.get("name", "")))
    if kind == "watrous":
        from .translators import WatrousPartitionedDef

        return WatrousPartitionedDef(int(doc["dl"]), int(doc["dc"]), int(doc["dr"]),
                                     _dense(matrix_from_json(doc["V"])))
    if kind == "margolus":
        from .translators import MargolusDef

        return MargolusDef(int(doc["d"]), int(doc["sigma"]), tuple(int(x) for x in doc["dims"]),
                           _dense(matrix_from_json(doc["U0"])), _dense(matrix_from_json(doc["U1"])))
    if kind == "universal":
        from .compiler import universal_qca

        gates = {str(k): _dense(matrix_from_json(v)) for k, v in doc["gate_set"].items()}
        return universal_qca(gates)
    raise ModelFormatError(f"unknown model tag {kind!r}")


def _dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc


def read_model(path) -> Model:
    return model_from_json(load_json(path))


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# -- state snapshots ----------------------------------------------------------------------


def _cell_indices(state) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry cell basis indices (entries x cells) and amplitudes."""
    if isinstance(state, SparseState):
        return state.cell_indices(), state.amps
    L = state.layout
    n = state.n_cells
    flat = np.arange(state.amps.size)
    qd = np.array(np.unravel_index(flat, state.tensor_dims)).T if state.tensor_dims else \
        np.zeros((flat.size, 0), dtype=np.int64)
    cells = np.zeros((flat.size, n), dtype=np.int64)
    for p in range(n):
        idx = np.zeros(flat.size, dtype=np.int64)
        for pos in range(L.n_registers):
            if pos in L.quantum_positions:
                v = qd[:, p * state.nq + L.quantum_positions.index(pos)]
            else:
                v = state.classical[p, L.classical_positions.index(pos)]
            idx = idx * L.dims[pos] + v
        cells[:, p] = idx
    return cells, state.amps


def snapshot_entries(state, threshold: float = DEFAULT_SNAPSHOT_THRESHOLD):
    """``(basis_index, amplitude)`` pairs with ``|amplitude| > threshold``, sorted by index.

    The index runs over the full register basis of the region (cells
    lexicographic, registers in declaration order) and may exceed 64 bits.
    """
    cells, amps = _cell_indices(state)
    keep = np.abs(amps) > threshold
    cells, amps = cells[keep], amps[keep]
    D = state.layout.cell_dimension
    out = []
    for row, a in zip(cells, amps):
        idx = 0
        for c in row:
            idx = idx * D + int(c)
        out.append((idx, complex(a)))
    out.sort(key=lambda e: e[0])
    return out


def state_to_json(state, threshold: float = DEFAULT_SNAPSHOT_THRESHOLD) -> dict:
    return {"format": STATE_FORMAT, "version": FORMAT_VERSION, "t": state.t,
            "region": region_to_json(state.region), "layout": layout_to_json(state.layout),
            "threshold": threshold,
            "entries": [[i, a.real, a.imag] for i, a in snapshot_entries(state, threshold)]}


def state_from_json(doc: dict, dense: bool | None = None):
    """Rebuild a state; dense when the quantum factor fits under the amplitude cap."""
    if not isinstance(doc, dict) or doc.get("format") != STATE_FORMAT:
        raise ModelFormatError("not a luqca state document")
    try:
        region = region_from_json(doc["region"])
        layout = layout_from_json(doc["layout"])
        entries = doc["entries"]
    except (KeyError, TypeError, ValueError, LuqcaError) as exc:
        raise ModelFormatError(f"invalid state document: {exc}") from exc
    return _state_from_entries(region, layout, [(int(i), complex(re, im)) for i, re, im in entries],
                               int(doc.get("t", 0)), dense)


def _state_from_entries(region, layout, entries, t, dense):
    n = region.n_cells
    D = layout.cell_dimension
    if not entries:
        raise ModelFormatError("state has no entries")
    digits = np.zeros((len(entries), n, layout.n_registers), dtype=np.int64)
    amps = np.zeros(len(entries), dtype=np.complex128)
    for k, (idx, a) in enumerate(entries):
        for p in range(n - 1, -1, -1):
            idx, c = divmod(idx, D)
            digits[k, p] = layout.decode(c)
        amps[k] = a
    sparse = SparseState(region, layout, digits, amps, t)
    if dense is None:
        dense = math.prod(layout.quantum_dims) ** n <= amplitude_cap()
    if not dense:
        return sparse
    cls = digits[:, :, list(layout.classical_positions)]
    if np.any(cls != cls[:1]):
        raise ModelFormatError("classical registers are in superposition; load as sparse")
    state = RegionState.zeros_like_layout(region, layout)
    state.classical = cls[0].copy()
    state.t = t
    q = digits[:, :, list(layout.quantum_positions)].reshape(len(entries), -1)
    if q.shape[1]:
        flat = np.ravel_multi_index(tuple(q.T), state.tensor_dims)
    else:
        flat = np.zeros(len(entries), dtype=np.int64)
    state.amps[flat] = amps
    return state


def write_state(path, state, fmt: str = "json",
                threshold: float = DEFAULT_SNAPSHOT_THRESHOLD) -> None:
    if fmt == "json":
        write_json(path, state_to_json(state, threshold))
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    meta = json.dumps({"t": state.t, "region": region_to_json(state.region),
                       "layout": layout_to_json(state.layout)})
    rows = [[i, repr(a.real), repr(a.imag)] for i, a in snapshot_entries(state, threshold)]
    write_table(path, "state " + meta, ["index", "re", "im"], rows)


def read_state(path, dense: bool | None = None):
    path = Path(path)
    if path.suffix == ".csv":
        kind, columns, rows = read_table(path)
        if not kind.startswith("state "):
            raise ModelFormatError("not a state table")
        meta = json.loads(kind[len("state "):])
        entries = [(int(r[0]), complex(float(r[1]), float(r[2]))) for r in rows]
        return _state_from_entries(region_from_json(meta["region"]),
                                   layout_from_json(meta["layout"]), entries,
                                   int(meta["t"]), dense)
    return state_from_json(load_json(path), dense)


# -- CSV tables ---------------------------------------------------------------------------


def write_table(path, kind: str, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with a versioned comment header naming the table kind."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{CSV_HEADER} {kind}\n")
        writer = csv.writer(fh)
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow(list(row))


def read_table(path) -> tuple[str, list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(CSV_HEADER):
            raise ModelFormatError(f"{path}: missing '{CSV_HEADER}' header")
        kind = first[len(CSV_HEADER):].strip()
        reader = csv.reader(fh)
        columns = next(reader)
        return kind, columns, [row for row in reader]


def cell_label(cell: Sequence[int]) -> str:
    return "site_" + "_".join(str(c) for c in cell)


__all__ = [
    "BUILDERS", "CSV_HEADER", "Model", "ModelFormatError", "builder_document", "cell_label",
    "cnot_read_fixture", "layout_from_json", "layout_to_json", "load_json", "matrix_from_json",
    "matrix_to_json", "model_from_json", "model_to_json", "parse_region", "read_model",
    "read_state", "read_table", "region_from_json", "region_to_json", "snapshot_entries",
    "state_from_json", "state_to_json", "universal_document", "write_json", "write_state",
    "write_table",
]
