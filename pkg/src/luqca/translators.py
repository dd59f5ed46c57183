"""Embedding partitioned automata into the read/update model.

Two earlier formalisms are translated: one-dimensional partitioned
automata whose cells are (left, centre, right) triples, and the
generalised Margolus scheme with alternating block partitions.  Each
translation comes with a direct simulator of the source model used as a
test oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    TORUS,
    CellLayout,
    DefinitionError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
)
from .linalg import is_unitary
from .operators import IDENTITY, Action, ControlledRule
from .state import RegionState

# -- partitioned (left, centre, right) automata ---------------------------------------


@dataclass(frozen=True, eq=False)
class WatrousPartitionedDef:
    """Cells are triples (l, c, r); one step moves ``l`` right and ``r`` left, then applies ``V``.

    After a step cell ``k`` holds ``(l_{k-1}, c_k, r_{k+1})`` transformed by ``V``.
    ``V`` acts on the triple in the order (l, c, r).
    """

    dl: int
    dc: int
    dr: int
    V: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=np.complex128)
        n = self.dl * self.dc * self.dr
        if V.shape != (n, n):
            raise DefinitionError(f"V must be {n}x{n}")
        ok, res = is_unitary(V, 1e-9)
        if not ok:
            raise DefinitionError(f"V is not unitary (residual {res:.2e})")
        object.__setattr__(self, "V", V)

    @property
    def padded(self) -> int:
        return max(self.dl, self.dr)

    def padded_update(self) -> np.ndarray:
        """``V`` on the valid (l, r) symbols and identity on padding symbols."""
        n, dc = self.padded, self.dc
        size = n * dc * n
        M = np.eye(size, dtype=np.complex128)
        valid = [l * dc * n + c * n + r for l in range(self.dl) for c in range(dc)
                 for r in range(self.dr)]
        M[np.ix_(valid, valid)] = self.V
        return M


def _swap_factors(dims: Sequence[int], a: int, b: int) -> np.ndarray:
    size = math.prod(dims)
    idx = np.arange(size)
    digits = np.array(np.unravel_index(idx, dims))
    digits[[a, b]] = digits[[b, a]]
    target = np.ravel_multi_index(tuple(digits), dims)
    M = np.zeros((size, size), dtype=np.complex128)
    M[target, idx] = 1.0
    return M


def watrous_to_luqca(w: WatrousPartitionedDef) -> QcaDefinition:
    """``U = P_1`` exchanges ``l`` of a cell with ``r`` of its right neighbour; ``V' = V P_2``.

    ``P_2`` exchanges ``l`` and ``r`` inside a cell.  The smaller side
    alphabet is padded with unused symbols on which ``V`` acts trivially.
    """
    n = w.padded
    layout = CellLayout([Register("l", n), Register("c", w.dc, classical=w.dc == 1),
                         Register("r", n)])
    U = _swap_factors([n, w.dc, n, n, w.dc, n], 0, 5)
    P2 = _swap_factors([n, w.dc, n], 0, 2)
    V = w.padded_update() @ P2
    return QcaDefinition(layout, NeighborhoodScheme.interval(0, 1), U, V, None, name="watrous",
                         metadata={"dl": w.dl, "dc": w.dc, "dr": w.dr})


def watrous_embed(w: WatrousPartitionedDef, vec: np.ndarray, n_cells: int) -> np.ndarray:
    """Map a state over unpadded triples into the padded cell basis."""
    n = w.padded
    small = (w.dl, w.dc, w.dr) * n_cells
    tensor = np.asarray(vec, dtype=np.complex128).reshape(small)
    big = np.zeros((n, w.dc, n) * n_cells, dtype=np.complex128)
    big[tuple(slice(0, s) for s in small)] = tensor
    return big.reshape(-1)


def watrous_restrict(w: WatrousPartitionedDef, vec: np.ndarray, n_cells: int) -> np.ndarray:
    n = w.padded
    small = (w.dl, w.dc, w.dr) * n_cells
    big = np.asarray(vec).reshape((n, w.dc, n) * n_cells)
    return big[tuple(slice(0, s) for s in small)].reshape(-1).copy()


def watrous_oracle_step(w: WatrousPartitionedDef, vec: np.ndarray, n_cells: int) -> np.ndarray:
    """One step of the partitioned automaton on a ring, applied directly."""
    dims = (w.dl, w.dc, w.dr) * n_cells
    tensor = np.asarray(vec, dtype=np.complex128).reshape(dims)
    # new l_k = old l_{k-1}, new r_k = old r_{k+1}
    axes = []
    for k in range(n_cells):
        axes += [3 * ((k - 1) % n_cells), 3 * k + 1, 3 * ((k + 1) % n_cells) + 2]
    tensor = np.transpose(tensor, axes)
    Vt = w.V.reshape(w.dl, w.dc, w.dr, w.dl, w.dc, w.dr)
    for k in range(n_cells):
        tensor = np.tensordot(Vt, tensor, axes=([3, 4, 5], [3 * k, 3 * k + 1, 3 * k + 2]))
        tensor = np.moveaxis(tensor, [0, 1, 2], [3 * k, 3 * k + 1, 3 * k + 2])
    return tensor.reshape(-1)


# -- generalised Margolus ------------------------------------------------------------------


def corner_vectors(d: int) -> list[tuple[int, ...]]:
    return list(itertools.product((-1, 1), repeat=d))


@dataclass(frozen=True, eq=False)
class MargolusDef:
    """Alternating block dynamics on blocks of ``2^d`` cells.

    ``U0`` maps the data of an even block (cells ``s + {0,1}^d``, lexicographic)
    to the product of subsystems ``H_v`` (``v`` in ``{-1,+1}^d``, lexicographic)
    of dimensions ``dims``.  Subsystem ``v`` travels to the odd block in
    direction ``v``, where ``U1`` maps the gathered product back to cell data.
    """

    d: int
    sigma: int
    dims: tuple[int, ...]
    U0: np.ndarray
    U1: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise DefinitionError("dimension must be >= 1")
        dims = tuple(int(x) for x in self.dims)
        if len(dims) != 2**self.d or any(x < 1 for x in dims):
            raise DefinitionError(f"need {2**self.d} positive subsystem dimensions")
        K = self.sigma ** (2**self.d)
        if math.prod(dims) != K:
            raise DefinitionError(f"subsystem dimensions multiply to {math.prod(dims)}, "
                                  f"expected {K}")
        for label in ("U0", "U1"):
            M = np.asarray(getattr(self, label), dtype=np.complex128)
            if M.shape != (K, K):
                raise DefinitionError(f"{label} must be {K}x{K}")
            ok, res = is_unitary(M, 1e-9)
            if not ok:
                raise DefinitionError(f"{label} is not unitary (residual {res:.2e})")
            object.__setattr__(self, label, M)
        object.__setattr__(self, "dims", dims)

    @property
    def block_size(self) -> int:
        return 2**self.d


def _mem_name(v: Sequence[int]) -> str:
    return "m" + "".join("+" if c > 0 else "-" for c in v)


def margolus_layout(m: MargolusDef) -> CellLayout:
    regs = [Register("data", m.sigma)]
    for v, dim in zip(corner_vectors(m.d), m.dims):
        regs.append(Register(_mem_name(v), dim, classical=dim == 1))
    regs += [Register("clock", 2, True), Register("parity", 2**m.d, True)]
    return CellLayout(regs)


def margolus_to_luqca(m: MargolusDef) -> QcaDefinition:
    """Two read/update steps per Margolus period.

    Registers per cell: data, one memory ``m_v`` per corner vector, a
    classical clock and a static classical parity (coordinates mod 2).  On
    clock 0 the read operator anchored at an even cell (with consistent
    parities and clocks across its block) applies ``U0`` to the block data
    and swaps the result into the memories, subsystem ``v`` landing in the
    cell ``s + (1 + v) / 2``.  On clock 1 the operator anchored at an odd
    cell gathers ``m_v`` from cell ``a + (1 - v) / 2``, swaps it into the data
    registers and applies ``U1``.  ``V`` flips the clock.
    """
    d = m.d
    layout = margolus_layout(m)
    offsets = list(itertools.product((0, 1), repeat=d))
    nb = NeighborhoodScheme(tuple(offsets))
    n = nb.size
    vs = corner_vectors(d)
    mem_pos = {v: 1 + i for i, v in enumerate(vs)}
    quantum_vs = [v for v, dim in zip(vs, m.dims) if dim > 1]
    clock_pos = 1 + len(vs)
    K = m.sigma**n
    cpos = layout.classical_positions
    nc = len(cpos)
    ci_clock = cpos.index(clock_pos)
    ci_parity = cpos.index(clock_pos + 1)

    def parity_code(bits) -> int:
        code = 0
        for b in bits:
            code = code * 2 + b
        return code

    swap = np.zeros((K * K, K * K), dtype=np.complex128)
    for i in range(K):
        for j in range(K):
            swap[j * K + i, i * K + j] = 1.0
    eye = np.eye(K, dtype=np.complex128)
    stage_a = swap @ np.kron(m.U0, eye)
    stage_b = np.kron(m.U1, eye) @ swap

    data_slots = tuple((k, 0) for k in range(n))
    slots_a = data_slots + tuple(
        (offsets.index(tuple((1 + c) // 2 for c in v)), mem_pos[v]) for v in quantum_vs)
    slots_b = data_slots + tuple(
        (offsets.index(tuple((1 - c) // 2 for c in v)), mem_pos[v]) for v in quantum_vs)
    act_a = Action(None, slots_a, stage_a)
    act_b = Action(None, slots_b, stage_b)

    def read(cfg):
        clocks = [cfg[k * nc + ci_clock] for k in range(n)]
        parities = [cfg[k * nc + ci_parity] for k in range(n)]
        if len(set(clocks)) != 1:
            return IDENTITY
        if clocks[0] == 0:
            expected = [parity_code(e) for e in offsets]
            return act_a if parities == expected else IDENTITY
        expected = [parity_code([1 - b for b in e]) for e in offsets]
        return act_b if parities == expected else IDENTITY

    def update(cfg):
        new = list(cfg)
        new[ci_clock] = 1 - cfg[ci_clock]
        return Action(tuple(new))

    params = {"source": "margolus"}
    U = ControlledRule(layout, n, read, name="margolus-read", params=params)
    V = ControlledRule(layout, 1, update, name="clock-flip", params=params)
    return QcaDefinition(layout, nb, U, V, None, name="margolus", metadata={"margolus": m})


def margolus_region(m: MargolusDef, shape: Sequence[int]) -> Region:
    if len(shape) != m.d or any(s % 2 or s < 2 for s in shape):
        raise DefinitionError("Margolus regions need even side lengths >= 2 on every axis")
    return Region((0,) * m.d, tuple(s - 1 for s in shape), TORUS)


def margolus_state(qca: QcaDefinition, m: MargolusDef, region: Region,
                   data: np.ndarray) -> RegionState:
    """Data vector (one ``sigma``-dimensional factor per cell) with empty memories, clock 0."""
    layout = qca.layout
    n = region.n_cells
    mem_dim = math.prod(layout.quantum_dims) // m.sigma
    data = np.asarray(data, dtype=np.complex128).reshape((m.sigma,) * n)
    zero = np.zeros(mem_dim, dtype=np.complex128)
    zero[0] = 1.0
    tensor = data
    for _ in range(n):
        tensor = np.multiply.outer(tensor, zero)
    # axes: data_0..data_{n-1}, mem_0..mem_{n-1}; interleave per cell
    order = [a for k in range(n) for a in (k, n + k)]
    tensor = np.transpose(tensor, order)
    parity = layout.classical_positions.index(len(layout.registers) - 1)
    classical = np.zeros((n, len(layout.classical_positions)), dtype=np.int64)
    for p, cell in enumerate(region.cells):
        code = 0
        for c in cell:
            code = code * 2 + (c % 2)
        classical[p, parity] = code
    return RegionState(region, layout, tensor.reshape(-1), classical)


def margolus_data(state: RegionState, m: MargolusDef, tol: float = 1e-9) -> np.ndarray:
    """Data registers after a full period; memories must be back in ``|0>``."""
    n = state.region.n_cells
    mem_dim = math.prod(state.layout.quantum_dims) // m.sigma
    tensor = state.amps.reshape([m.sigma, mem_dim] * n)
    index = []
    for _ in range(n):
        index += [slice(None), 0]
    out = tensor[tuple(index)].reshape(-1)
    weight = float(np.vdot(out, out).real)
    if abs(weight - float(np.vdot(state.amps, state.amps).real)) > tol:
        raise DefinitionError("memory registers are not empty; read data after a full period")
    return out.copy()


def _apply_labeled(tensor, labels, in_labels, op, out_labels, out_dims):
    idx = [labels.index(lb) for lb in in_labels]
    rest = [i for i in range(len(labels)) if i not in idx]
    moved = np.transpose(tensor, idx + rest)
    rest_shape = moved.shape[len(idx):]
    mat = moved.reshape(op.shape[1], -1)
    res = (op @ mat).reshape(tuple(out_dims) + rest_shape)
    return res, list(out_labels) + [labels[i] for i in rest]


def margolus_oracle_period(m: MargolusDef, data: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """One Margolus period applied directly to the data of a torus of the given shape."""
    d = m.d
    shape = tuple(shape)
    cells = list(itertools.product(*(range(s) for s in shape)))
    offsets = list(itertools.product((0, 1), repeat=d))
    vs = corner_vectors(d)
    tensor = np.asarray(data, dtype=np.complex128).reshape((m.sigma,) * len(cells))
    labels: list = [("cell", c) for c in cells]

    def wrap(c):
        return tuple(x % s for x, s in zip(c, shape))

    evens = [c for c in cells if all(x % 2 == 0 for x in c)]
    for s in evens:
        block = [("cell", wrap(tuple(a + e for a, e in zip(s, off)))) for off in offsets]
        tensor, labels = _apply_labeled(tensor, labels, block, m.U0,
                                        [("sub", s, v) for v in vs], m.dims)
    odds = [c for c in cells if all(x % 2 == 1 for x in c)]
    for a in odds:
        sources = [("sub", wrap(tuple(x - c for x, c in zip(a, v))), v) for v in vs]
        outs = [("cell", wrap(tuple(x + e for x, e in zip(a, off)))) for off in offsets]
        tensor, labels = _apply_labeled(tensor, labels, sources, m.U1, outs,
                                        [m.sigma] * len(offsets))
    order = [labels.index(("cell", c)) for c in cells]
    return np.transpose(tensor, order).reshape(-1)


def margolus_shift_right(sigma: int = 2) -> MargolusDef:
    """One-dimensional shift by one cell per period, written as Margolus stages."""
    K = sigma**2
    eye = np.eye(K, dtype=np.complex128)
    return MargolusDef(1, sigma, (1, K), eye, eye)


__all__ = [
    "MargolusDef", "WatrousPartitionedDef", "margolus_data", "margolus_oracle_period",
    "margolus_region", "margolus_shift_right", "margolus_state", "margolus_to_luqca",
    "watrous_embed", "watrous_oracle_step", "watrous_restrict", "watrous_to_luqca",
]
