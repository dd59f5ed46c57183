"""Automata to layered circuits and back.

``compile_to_circuit`` turns ``t`` steps on a finite region into a circuit
whose depth is ``c * t`` with ``c`` fixed by the neighbourhood.
``encode_circuit_as_qca`` builds a two-dimensional automaton (rows are
wires, columns are circuit layers) whose evolution carries out a
nearest-neighbour circuit, two automaton steps per circuit layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    TORUS,
    CellLayout,
    DefinitionError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
)
from .engine import placements
from .linalg import is_unitary
from .operators import IDENTITY, Action, ControlledRule
from .state import RegionState, _check_cap, _gather_indices

CIRCUIT_FORMAT = "luqca-circuit"
CIRCUIT_VERSION = 1


@dataclass(eq=False)
class Gate:
    matrix: np.ndarray
    wires: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        self.wires = tuple(int(w) for w in self.wires)
        if len(set(self.wires)) != len(self.wires):
            raise DefinitionError(f"gate {self.name or ''} repeats a wire")


@dataclass(eq=False)
class Circuit:
    wire_dims: list[int]
    layers: list[list[Gate]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def n_wires(self) -> int:
        return len(self.wire_dims)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def check(self, tol: float = 1e-10) -> None:
        for li, layer in enumerate(self.layers):
            used: set[int] = set()
            for g in layer:
                if used & set(g.wires):
                    raise DefinitionError(f"layer {li} applies two gates to one wire")
                used |= set(g.wires)
                dim = math.prod(self.wire_dims[w] for w in g.wires)
                if g.matrix.shape != (dim, dim):
                    raise DefinitionError(f"gate on wires {g.wires} has shape {g.matrix.shape}")
                ok, res = is_unitary(g.matrix, tol)
                if not ok:
                    raise DefinitionError(f"gate on wires {g.wires} is not unitary ({res:.2e})")

    def as_dict(self) -> dict:
        return {
            "format": CIRCUIT_FORMAT,
            "version": CIRCUIT_VERSION,
            "wire_dims": list(self.wire_dims),
            "layers": [[_gate_dict(g) for g in layer] for layer in self.layers],
            "metadata": _jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        if data.get("format") != CIRCUIT_FORMAT:
            raise ValueError("not a circuit document")
        if data.get("version") != CIRCUIT_VERSION:
            raise ValueError(f"unsupported circuit version {data.get('version')}")
        layers = [[Gate(_matrix_from_pairs(g["matrix"]), g["wires"], g.get("name", ""))
                   for g in layer] for layer in data["layers"]]
        return cls(list(data["wire_dims"]), layers, dict(data.get("metadata", {})))


def _gate_dict(g: Gate) -> dict:
    out = {"wires": list(g.wires),
           "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in g.matrix]}
    if g.name:
        out["name"] = g.name
    return out


def _matrix_from_pairs(rows) -> np.ndarray:
    arr = np.array(rows, dtype=np.float64)
    return arr[..., 0] + 1j * arr[..., 1]


def _jsonable(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, (str, int, float, bool)) or v is None:
            out[k] = v
        elif isinstance(v, (list, tuple)):
            out[k] = [list(x) if isinstance(x, tuple) else x for x in v]
    return out


# -- simulation ---------------------------------------------------------------------

def simulate_circuit(circuit: Circuit, vec: np.ndarray, backend=None) -> np.ndarray:
    """Apply the layers in order to a state vector (wire 0 most significant)."""
    dims = tuple(circuit.wire_dims)
    vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
    if vec.size != math.prod(dims):
        raise DefinitionError(f"input has {vec.size} amplitudes, circuit expects "
                              f"{math.prod(dims)}")
    _check_cap(vec.size)
    out = vec.copy()
    for layer in circuit.layers:
        for g in layer:
            outer, local = _gather_indices(dims, g.wires)
            out = _kernels.apply_gathered(out, outer, local, g.matrix, backend=backend)
    return out


# -- compilation ----------------------------------------------------------------------

def _schedule(plist, n_positions_key) -> list[list]:
    """Residue classes of placements, split greedily where a torus wraps unevenly."""
    classes: dict[tuple, list] = {}
    for x, wires in plist:
        classes.setdefault(n_positions_key(x), []).append((x, wires))
    layers = []
    for key in sorted(classes):
        pending = classes[key]
        while pending:
            used: set[int] = set()
            layer, rest = [], []
            for item in pending:
                if used & set(item[1]):
                    rest.append(item)
                else:
                    layer.append(item)
                    used |= set(item[1])
            layers.append(layer)
            pending = rest
    return layers


def compile_to_circuit(qca: QcaDefinition, region: Region, t: int) -> Circuit:
    """Circuit for ``t`` steps on ``region``; wires are region cells then boundary ancillas.

    In quiescent mode every exterior cell touched by a read operator gets an
    ancilla wire that starts in the quiescent state.  Each step is a set of
    read sub-layers (placements grouped by coordinate residues modulo the
    neighbourhood diameter) followed by one update layer on the region wires.
    """
    if t < 0:
        raise ValueError("number of steps must be non-negative")
    U = qca.read_matrix()
    V = qca.update_matrix()
    D = qca.layout.cell_dimension
    plist = placements(region, qca.neighborhood)
    ancilla_cells: list[tuple[int, ...]] = []
    wire_of: dict[tuple[int, ...], int] = {}
    gates = []
    for x, positions in plist:
        wires = []
        for off, p in zip(qca.neighborhood.offsets, positions):
            if p is None:
                cell = tuple(a + b for a, b in zip(x, off))
                if cell not in wire_of:
                    wire_of[cell] = region.n_cells + len(ancilla_cells)
                    ancilla_cells.append(cell)
                wires.append(wire_of[cell])
            else:
                wires.append(p)
        gates.append((x, tuple(wires)))
    if ancilla_cells and qca.quiescent is None:
        raise DefinitionError("quiescent boundary needs a quiescent state")
    diam = qca.neighborhood.diameter
    sublayers = _schedule(gates, lambda x: tuple(c % m for c, m in zip(x, diam)))
    n_wires = region.n_cells + len(ancilla_cells)
    circuit = Circuit([D] * n_wires, [], {
        "region_wires": region.n_cells,
        "ancilla_cells": [list(c) for c in ancilla_cells],
        "ancilla_fill": qca.quiescent,
        "layers_per_step": len(sublayers) + 1,
        "steps": t,
    })
    for _ in range(t):
        for layer in sublayers:
            circuit.layers.append([Gate(U, wires, "U") for _, wires in layer])
        circuit.layers.append([Gate(V, (p,), "V") for p in range(region.n_cells)])
    return circuit


def layers_per_step(circuit: Circuit) -> int:
    return int(circuit.metadata["layers_per_step"])


def circuit_input(circuit: Circuit, region_vec: np.ndarray) -> np.ndarray:
    """Region state tensored with quiescent ancillas."""
    out = np.asarray(region_vec, dtype=np.complex128).reshape(-1)
    for cell in circuit.metadata.get("ancilla_cells", []):
        D = circuit.wire_dims[-1]
        fill = np.zeros(D, dtype=np.complex128)
        fill[circuit.metadata["ancilla_fill"]] = 1.0
        out = np.kron(out, fill)
    return out


def circuit_region_output(circuit: Circuit, vec: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Project the ancillas back onto the quiescent state and return the region part."""
    n_anc = len(circuit.metadata.get("ancilla_cells", []))
    if not n_anc:
        return vec
    D = circuit.wire_dims[-1]
    q = circuit.metadata["ancilla_fill"]
    index = sum(q * D**i for i in range(n_anc))
    out = np.asarray(vec).reshape(-1, D**n_anc)[:, index]
    loss = 1.0 - float(np.vdot(out, out).real) / max(float(np.vdot(vec, vec).real), 1e-300)
    if loss > tol:
        raise DefinitionError(f"ancillas left the quiescent state (weight {loss:.3e})")
    return out


# -- routing --------------------------------------------------------------------------

def _swap_matrix(d: int) -> np.ndarray:
    M = np.zeros((d * d, d * d), dtype=np.complex128)
    for a in range(d):
        for b in range(d):
            M[b * d + a, a * d + b] = 1.0
    return M


def route_nearest_neighbor(circuit: Circuit, order: Sequence[int] | None = None) -> Circuit:
    """Insert swaps so that every two-wire gate acts on neighbouring wires of ``order``.

    ``order[i]`` is the wire at line position ``i``.  Each distant gate is
    preceded by swaps that walk its first wire towards the second and
    followed by the reverse swaps; the gate list is then re-layered as
    early as possible.
    """
    n = circuit.n_wires
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise DefinitionError("order must be a permutation of the wires")
    pos = {w: i for i, w in enumerate(order)}
    needs = False
    for layer in circuit.layers:
        for g in layer:
            if len(g.wires) > 2:
                raise DefinitionError("routing supports gates on at most two wires")
            if len(g.wires) == 2 and abs(pos[g.wires[0]] - pos[g.wires[1]]) != 1:
                needs = True
    if not needs:
        return Circuit(list(circuit.wire_dims), [list(layer) for layer in circuit.layers],
                       dict(circuit.metadata))
    sequence: list[Gate] = []
    for layer in circuit.layers:
        for g in layer:
            if len(g.wires) < 2 or abs(pos[g.wires[0]] - pos[g.wires[1]]) == 1:
                sequence.append(g)
                continue
            a, b = g.wires
            pa, pb = pos[a], pos[b]
            step = 1 if pb > pa else -1
            path = [order[p] for p in range(pa, pb, step)]  # a, then wires between
            swaps = []
            for u, v in zip(path[:-1], path[1:]):
                if circuit.wire_dims[u] != circuit.wire_dims[v]:
                    raise DefinitionError("cannot swap wires of different dimension")
                swaps.append(Gate(_swap_matrix(circuit.wire_dims[u]), (u, v), "SWAP"))
            sequence.extend(swaps)
            sequence.append(Gate(g.matrix, (path[-1], b), g.name))
            sequence.extend(reversed(swaps))
    return Circuit(list(circuit.wire_dims), _asap(sequence, n), dict(circuit.metadata))


def _asap(sequence: Sequence[Gate], n_wires: int) -> list[list[Gate]]:
    ready = [0] * n_wires
    layers: list[list[Gate]] = []
    for g in sequence:
        level = max(ready[w] for w in g.wires)
        if level == len(layers):
            layers.append([])
        layers[level].append(g)
        for w in g.wires:
            ready[w] = level + 1
    return layers


# -- universal encoding ----------------------------------------------------------------

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
T_GATE = np.diag([1, np.exp(1j * math.pi / 4)]).astype(np.complex128)
X_GATE = np.array([[0, 1], [1, 0]], dtype=np.complex128)
CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
SWAP_QUBITS = _swap_matrix(2)
DEFAULT_GATE_SET = {"H": HADAMARD, "T": T_GATE, "X": X_GATE}

NOP, CP_LOWER, CP_UPPER = 0, 1, 2
STATE, GATE, CLOCK, ACTIVE, COLOR = range(5)
UP, LEFT, CENTRE, RIGHT, DOWN = range(5)  # lexicographic order of the 2D offsets


def universal_layout(n_single: int = 3) -> CellLayout:
    return CellLayout([
        Register("state", 2),
        Register("gate", 3 + n_single, True),
        Register("clock", 6, True),
        Register("active", 2, True),
        Register("color", 3, True),
    ])


def universal_qca(gate_set: dict | None = None) -> QcaDefinition:
    """Two-dimensional automaton that executes circuits stored in its gate registers.

    Even clock values are operate phases: an active cell applies its own
    single-qubit gate, and a ``CP_LOWER`` cell below a ``CP_UPPER`` cell with
    the same clock applies a controlled phase to both state registers.
    Odd clock ``2i + 1`` is carry sub-phase ``i``: a cell of column colour
    ``i`` whose right neighbour has colour ``i + 1`` and whose neighbourhood
    agrees on the clock exchanges (state, active) with that neighbour when
    exactly one of the two is active.  ``V`` advances the clock.
    """
    gate_set = dict(DEFAULT_GATE_SET if gate_set is None else gate_set)
    names = list(gate_set)
    mats = [np.asarray(gate_set[k], dtype=np.complex128) for k in names]
    layout = universal_layout(len(names))
    nb = NeighborhoodScheme(((-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)))
    nc = 4  # gate, clock, active, color

    def field_of(cfg, cell, reg):
        return cfg[cell * nc + (reg - 1)]

    def read(cfg):
        clock = field_of(cfg, CENTRE, CLOCK)
        gate = field_of(cfg, CENTRE, GATE)
        if clock % 2 == 0:
            if field_of(cfg, CENTRE, ACTIVE) != 1:
                return IDENTITY
            if gate >= 3:
                return Action(None, ((CENTRE, STATE),), mats[gate - 3])
            if (gate == CP_LOWER and field_of(cfg, UP, GATE) == CP_UPPER
                    and field_of(cfg, UP, CLOCK) == clock):
                return Action(None, ((UP, STATE), (CENTRE, STATE)), CZ)
            return IDENTITY
        sub = (clock - 1) // 2
        if field_of(cfg, CENTRE, COLOR) != sub or field_of(cfg, RIGHT, COLOR) != (sub + 1) % 3:
            return IDENTITY
        if any(field_of(cfg, k, CLOCK) != clock for k in range(5)):
            return IDENTITY
        a, b = field_of(cfg, CENTRE, ACTIVE), field_of(cfg, RIGHT, ACTIVE)
        if a == b:
            return IDENTITY
        new = list(cfg)
        new[CENTRE * nc + ACTIVE - 1], new[RIGHT * nc + ACTIVE - 1] = b, a
        return Action(tuple(new), ((CENTRE, STATE), (RIGHT, STATE)), SWAP_QUBITS)

    def update(cfg):
        new = list(cfg)
        new[CLOCK - 1] = (cfg[CLOCK - 1] + 1) % 6
        return Action(tuple(new))

    params = {"gate_set": names}
    U = ControlledRule(layout, nb.size, read, name="universal-read", params=params)
    V = ControlledRule(layout, 1, update, name="clock-advance", params=params)
    return QcaDefinition(layout, nb, U, V, None, name="universal",
                         metadata={"gate_set": {k: m for k, m in zip(names, mats)}})


@dataclass(eq=False)
class UniversalEncoding:
    qca: QcaDefinition
    initial: RegionState
    steps: int
    wires: int
    columns: int
    output_cells: list[tuple[int, int]]


def _classify(gate: Gate, gate_set: dict) -> tuple[str, int | None]:
    if len(gate.wires) == 1:
        names = list(gate_set)
        if gate.name in gate_set:
            return gate.name, names.index(gate.name)
        for i, k in enumerate(names):
            if np.allclose(gate.matrix, gate_set[k], atol=1e-12):
                return k, i
        raise DefinitionError(f"single-qubit gate {gate.name or '?'} is not in the gate set")
    if len(gate.wires) == 2 and np.allclose(gate.matrix, CZ, atol=1e-12):
        a, b = sorted(gate.wires)
        if b - a != 1:
            raise DefinitionError(f"CZ on wires {gate.wires} is not nearest-neighbour")
        return "CZ", None
    raise DefinitionError("only CZ and gate-set single-qubit gates can be encoded")


def encode_circuit_as_qca(circuit: Circuit, gate_set: dict | None = None,
                          input_state: np.ndarray | None = None) -> UniversalEncoding:
    """Lay the circuit out on a torus: row ``w`` is wire ``w``, column ``j`` is layer ``j``.

    The input state sits on the state registers of column 0 (all active);
    after ``2 * depth`` steps the output sits on column ``depth``.
    """
    gate_set = dict(DEFAULT_GATE_SET if gate_set is None else gate_set)
    if any(d != 2 for d in circuit.wire_dims):
        raise DefinitionError("the universal automaton works on qubit wires")
    W, Dp = circuit.n_wires, circuit.depth
    rows = max(3, W)
    cols = 3 * math.ceil((Dp + 1) / 3)
    qca = universal_qca(gate_set)
    region = Region((0, 0), (rows - 1, cols - 1), TORUS)
    codes = np.zeros((rows, cols), dtype=np.int64)
    for j, layer in enumerate(circuit.layers):
        for g in layer:
            kind, idx = _classify(g, gate_set)
            if kind == "CZ":
                a, b = sorted(g.wires)
                codes[a, j], codes[b, j] = CP_UPPER, CP_LOWER
            else:
                codes[g.wires[0], j] = 3 + idx
    classical = np.zeros((region.n_cells, 4), dtype=np.int64)
    for p, (r, c) in enumerate(region.cells):
        classical[p] = (codes[r, c], 0, 1 if c == 0 else 0, c % 3)
    if input_state is None:
        input_state = np.zeros(2**W, dtype=np.complex128)
        input_state[0] = 1.0
    input_state = np.asarray(input_state, dtype=np.complex128).reshape(-1)
    if input_state.size != 2**W:
        raise DefinitionError("input state does not match the wire count")
    n = region.n_cells
    _check_cap(2**n)
    tensor = np.zeros((2,) * n, dtype=np.complex128)
    index = [0] * n
    for w in range(W):
        index[region.position((w, 0))] = slice(None)
    tensor[tuple(index)] = input_state.reshape((2,) * W) if W else input_state[0]
    initial = RegionState(region, qca.layout, tensor.reshape(-1), classical)
    return UniversalEncoding(qca, initial, 2 * Dp, W, cols, [(w, Dp) for w in range(W)])


def extract_output(state: RegionState, encoding: UniversalEncoding, tol: float = 1e-9) -> np.ndarray:
    """State of the output column's wire registers (all other registers must be |0>)."""
    region = state.region
    n = region.n_cells
    tensor = state.amps.reshape((2,) * n)
    index = [0] * n
    for cell in encoding.output_cells:
        index[region.position(cell)] = slice(None)
    out = np.asarray(tensor[tuple(index)]).reshape(-1)
    weight = float(np.vdot(out, out).real)
    if abs(weight - 1.0) > tol:
        raise DefinitionError(f"output column holds weight {weight:.6f}, expected 1")
    return out


def random_nn_circuit(rng: np.random.Generator, wires: int, columns: int,
                      gate_set: dict | None = None) -> Circuit:
    """Random nearest-neighbour circuit over a gate set plus CZ (one layer per column)."""
    gate_set = dict(DEFAULT_GATE_SET if gate_set is None else gate_set)
    names = list(gate_set)
    layers = []
    for _ in range(columns):
        layer = []
        w = 0
        while w < wires:
            choice = rng.integers(0, len(names) + 2)
            if choice == len(names) + 1 and w + 1 < wires:
                layer.append(Gate(CZ, (w, w + 1), "CZ"))
                w += 2
                continue
            if choice < len(names):
                layer.append(Gate(gate_set[names[choice]], (w,), names[choice]))
            w += 1
        layers.append(layer)
    return Circuit([2] * wires, layers)


__all__ = [
    "Circuit", "Gate", "UniversalEncoding", "circuit_input", "circuit_region_output",
    "compile_to_circuit", "encode_circuit_as_qca", "extract_output", "layers_per_step",
    "random_nn_circuit", "route_nearest_neighbor", "simulate_circuit", "universal_qca",
    "CZ", "HADAMARD", "T_GATE", "X_GATE", "DEFAULT_GATE_SET",
]
