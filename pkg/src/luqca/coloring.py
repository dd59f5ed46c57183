"""Colourings, coloured automata (CQCA) and their translation to and from LUQCA.

A CQCA has a periodic colouring of the lattice and a sequence of phases;
phase ``j`` applies the operator ``U^(j)`` (defined on the Manhattan
radius-1 neighbourhood) at every cell whose colour is ``c_j``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .core import (
    DEFAULT_TOL,
    CellLayout,
    DefinitionError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
    is_operator,
)
from .engine import DEFAULT_LEAK_TOL, apply_placements, placements
from .linalg import _matrix_commutator, embed_sparse, frobenius, is_unitary
from .operators import IDENTITY, Action, ControlledRule, all_quantum_slots, as_rule
from .state import RegionState, SparseState


# -- colourings -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Coloring:
    """Periodic colouring; ``table`` has shape ``period`` with values in ``[0, k)``."""

    table: np.ndarray
    k: int

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.ndim < 1 or table.size == 0:
            raise DefinitionError("colour table must be a non-empty array")
        if table.min() < 0 or table.max() >= self.k:
            raise DefinitionError(f"colours must lie in [0, {self.k})")
        object.__setattr__(self, "table", table)

    @classmethod
    def modular(cls, k: int, d: int = 1) -> "Coloring":
        """``(x_1 + ... + x_d) mod k`` with period ``k`` on every axis."""
        grids = np.indices((k,) * d).sum(axis=0) % k
        return cls(grids, k)

    @classmethod
    def checkerboard(cls, d: int) -> "Coloring":
        return cls.modular(2, d)

    @classmethod
    def constant(cls, d: int = 1) -> "Coloring":
        return cls(np.zeros((1,) * d, dtype=np.int64), 1)

    @property
    def dimension(self) -> int:
        return self.table.ndim

    @property
    def period(self) -> tuple[int, ...]:
        return self.table.shape

    def __call__(self, x: Sequence[int]) -> int:
        return int(self.table[tuple(int(c) % p for c, p in zip(x, self.period))])

    def cells_of_period(self):
        return itertools.product(*(range(p) for p in self.period))

    def neighbor_map(self, offset: Sequence[int]) -> dict[int, set[int]]:
        """Colour of ``x`` -> set of colours seen at ``x + offset``."""
        out: dict[int, set[int]] = {}
        for x in self.cells_of_period():
            y = tuple(a + b for a, b in zip(x, offset))
            out.setdefault(self(x), set()).add(self(y))
        return out

    def as_dict(self) -> dict:
        return {"k": self.k, "period": list(self.period), "table": self.table.reshape(-1).tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Coloring":
        return cls(np.array(data["table"]).reshape(data["period"]), int(data["k"]))


def validate_coloring(col: Coloring) -> bool:
    """True iff no two cells at Manhattan distance 1 share a colour (wrap seams included)."""
    d = col.dimension
    for x in col.cells_of_period():
        for axis in range(d):
            y = list(x)
            y[axis] += 1
            if col(x) == col(y):
                return False
    return True


def distinct_in_translates(col: Coloring, offsets: Sequence[Sequence[int]]) -> bool:
    """True iff every translate of ``offsets`` sees pairwise distinct colours."""
    for x in col.cells_of_period():
        seen = [col(tuple(a + b for a, b in zip(x, o))) for o in offsets]
        if len(set(seen)) != len(seen):
            return False
    return True


# -- symmetry -------------------------------------------------------------------------

def _swap_permutation(D: int, n: int, a: int, b: int) -> sp.csr_matrix:
    idx = np.arange(D**n)
    digits = np.array(np.unravel_index(idx, (D,) * n))
    digits[[a, b]] = digits[[b, a]]
    target = np.ravel_multi_index(tuple(digits), (D,) * n)
    return sp.csr_matrix((np.ones(idx.size), (target, idx)), shape=(D**n, D**n))


def symmetry_residuals(U, layout: CellLayout, d: int) -> tuple[float, float]:
    """(max SWAP commutator residual, off-block weight) on the radius-1 neighbourhood."""
    nb = NeighborhoodScheme.von_neumann(d)
    n = nb.size
    D = layout.cell_dimension
    M = sp.csr_matrix(U)
    if M.shape != (D**n, D**n):
        raise DefinitionError(f"operator shape {M.shape} does not match the neighbourhood")
    centre = nb.center
    others = [i for i in range(n) if i != centre]
    worst = 0.0
    for a, b in itertools.combinations(others, 2):
        S = _swap_permutation(D, n, a, b)
        worst = max(worst, frobenius(M @ S - S @ M))
    coo = M.tocoo()
    rd = np.array(np.unravel_index(coo.row, (D,) * n))[others]
    cd = np.array(np.unravel_index(coo.col, (D,) * n))[others]
    off = np.any(rd != cd, axis=0)
    off_block = float(np.sqrt((np.abs(coo.data[off]) ** 2).sum()))
    return worst, off_block


def is_symmetric(U, layout: CellLayout, tol: float = DEFAULT_TOL, d: int = 1) -> bool:
    """Neighbour-permutation invariant and block diagonal over neighbour basis states."""
    swap_res, off_block = symmetry_residuals(U, layout, d)
    return swap_res <= tol and off_block <= tol


# -- CQCA --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CqcaDefinition:
    layout: CellLayout
    coloring: Coloring
    operators: tuple
    colors: tuple[int, ...]
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ops = tuple(self.operators)
        cols = tuple(int(c) for c in self.colors)
        if not ops:
            D = self.layout.cell_dimension
            n = self.neighborhood.size
            ops = (sp.identity(D**n, format="csr", dtype=np.complex128),)
            cols = (0,)
        if len(ops) != len(cols):
            raise DefinitionError("need one colour per phase operator")
        if any(not 0 <= c < self.coloring.k for c in cols):
            raise DefinitionError("phase colour out of range")
        D = self.layout.cell_dimension
        n = self.neighborhood.size
        for op in ops:
            if isinstance(op, ControlledRule):
                if op.n_cells != n or op.layout != self.layout:
                    raise DefinitionError("phase rule does not match layout/neighbourhood")
            elif not is_operator(op) or op.shape != (D**n, D**n):
                raise DefinitionError(f"phase operator must be {D**n}x{D**n}")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "colors", cols)

    @property
    def neighborhood(self) -> NeighborhoodScheme:
        return NeighborhoodScheme.von_neumann(self.coloring.dimension)

    @property
    def T(self) -> int:
        return len(self.operators)

    @property
    def dimension(self) -> int:
        return self.coloring.dimension

    @cached_property
    def rules(self) -> tuple[ControlledRule, ...]:
        n = self.neighborhood.size
        return tuple(as_rule(op, self.layout, n) for op in self.operators)


def validate_cqca(cqca: CqcaDefinition, tol: float = DEFAULT_TOL) -> dict:
    """Unitarity, symmetry flags, colouring correctness and same-phase commutation."""
    out = {"coloring": validate_coloring(cqca.coloring), "phases": []}
    nb = cqca.neighborhood
    D = cqca.layout.cell_dimension
    ok = out["coloring"]
    for j, (op, c) in enumerate(zip(cqca.operators, cqca.colors)):
        entry = {"phase": j, "color": c}
        if is_operator(op):
            _, res = is_unitary(op, tol=math.inf)
            sym = symmetry_residuals(op, cqca.layout, cqca.dimension)
            entry.update(unitarity=res, symmetric=max(sym) <= tol)
            worst = 0.0
            anchors = [x for x in cqca.coloring.cells_of_period() if cqca.coloring(x) == c]
            for delta in nb.differences():
                if any(cqca.coloring(tuple(a + b for a, b in zip(x, delta))) == c
                       for x in anchors):
                    joint = sorted(set(nb.offsets) | {tuple(o + dd for o, dd in zip(off, delta))
                                                      for off in nb.offsets})
                    pa = [joint.index(o) for o in nb.offsets]
                    pb = [joint.index(tuple(o + dd for o, dd in zip(off, delta)))
                          for off in nb.offsets]
                    worst = max(worst, _matrix_commutator(op, D, len(joint), pa, pb))
            entry["same_phase_commutator"] = worst
            ok = ok and res <= tol and worst <= tol
        out["phases"].append(entry)
    out["passed"] = ok
    return out


def _color_placements(region: Region, cqca: CqcaDefinition, color: int):
    return tuple(p for p in placements(region, cqca.neighborhood) if cqca.coloring(p[0]) == color)


def cqca_step(state, cqca: CqcaDefinition, j: int, quiescent: int | None = None,
              leak_tol: float = DEFAULT_LEAK_TOL, order: Sequence[int] | None = None,
              inplace: bool = False):
    """Phase ``j``: apply ``U^(j)`` at every cell of colour ``c_j``."""
    if not 0 <= j < cqca.T:
        raise ValueError(f"phase {j} out of range for period {cqca.T}")
    if not inplace:
        state = state.copy()
    plist = _color_placements(state.region, cqca, cqca.colors[j])
    if order is not None:
        plist = tuple(plist[i] for i in order)
    apply_placements(state, cqca.rules[j], plist, quiescent, leak_tol)
    return state


def cqca_period(state, cqca: CqcaDefinition, periods: int = 1, quiescent: int | None = None,
                leak_tol: float = DEFAULT_LEAK_TOL):
    state = state.copy()
    for _ in range(periods):
        for j in range(cqca.T):
            cqca_step(state, cqca, j, quiescent, leak_tol, inplace=True)
    return state


# -- CQCA -> QCA ---------------------------------------------------------------------

def _allowed_patterns(col: Coloring, nb: NeighborhoodScheme) -> dict[int, set[tuple]]:
    out: dict[int, set[tuple]] = {}
    for x in col.cells_of_period():
        pattern = tuple(col(tuple(a + b for a, b in zip(x, o))) for o in nb.offsets)
        out.setdefault(col(x), set()).add(pattern)
    return out


def cqca_to_qca(cqca: CqcaDefinition) -> QcaDefinition:
    """LUQCA with extra classical ``color`` and ``clock`` registers per cell.

    ``U_x`` applies ``U^(j)`` when the clock of ``x`` is ``j``, its colour is
    ``c_j``, every neighbour's clock equals its own and the neighbour colours
    form a pattern that occurs in the colouring; otherwise it does nothing.
    ``V`` advances the clock modulo ``T``.  The result has no quiescent
    state and runs on a torus.
    """
    base = cqca.layout
    k, T = cqca.coloring.k, cqca.T
    layout = CellLayout(list(base.registers)
                        + [Register("color", k, True), Register("clock", T, True)])
    nb = cqca.neighborhood
    n = nb.size
    centre = nb.center
    nc_base = len(base.classical_positions)
    nc = nc_base + 2
    patterns = _allowed_patterns(cqca.coloring, nb)
    base_rules = cqca.rules

    def read(cfg):
        colors = tuple(cfg[i * nc + nc_base] for i in range(n))
        clocks = [cfg[i * nc + nc_base + 1] for i in range(n)]
        j = clocks[centre]
        if any(c != j for c in clocks):
            return IDENTITY
        if colors[centre] != cqca.colors[j] or colors not in patterns.get(colors[centre], ()):
            return IDENTITY
        base_cfg = tuple(v for i in range(n) for v in cfg[i * nc:i * nc + nc_base])
        act = base_rules[j].action(base_cfg)
        if act.is_identity:
            return IDENTITY
        new_cls = None
        if act.classical is not None:
            new_cls = tuple(v for i in range(n)
                            for v in (act.classical[i * nc_base:(i + 1) * nc_base]
                                      + (cfg[i * nc + nc_base], cfg[i * nc + nc_base + 1])))
        return Action(new_cls, act.slots, act.block)

    def update(cfg):
        if T == 1:
            return IDENTITY
        new = list(cfg)
        new[-1] = (cfg[-1] + 1) % T
        return Action(tuple(new))

    params = {"source": "cqca"}
    U = ControlledRule(layout, n, read, name="cqca-read", params=params)
    V = ControlledRule(layout, 1, update, name="clock-advance", params=params)
    return QcaDefinition(layout, nb, U, V, None, name=f"{cqca.name or 'cqca'}-lifted",
                         metadata={"cqca": cqca})


def lift_state(state, cqca: CqcaDefinition, qca: QcaDefinition, phase: int = 0):
    """Embed a CQCA state into the lifted layout with colours set and clock = ``phase``."""
    region = state.region
    colors = np.array([cqca.coloring(c) for c in region.cells], dtype=np.int64)
    clock = np.full(region.n_cells, phase, dtype=np.int64)
    if isinstance(state, SparseState):
        m = state.amps.size
        digits = np.concatenate([state.digits,
                                 np.broadcast_to(colors[None, :, None], (m, region.n_cells, 1)),
                                 np.broadcast_to(clock[None, :, None], (m, region.n_cells, 1))],
                                axis=2)
        return SparseState(region, qca.layout, digits, state.amps.copy(), state.t)
    classical = np.concatenate([state.classical, colors[:, None], clock[:, None]], axis=1)
    return RegionState(region, qca.layout, state.amps.copy(), classical, state.t)


def lower_state(state, cqca: CqcaDefinition):
    """Drop the colour and clock registers again."""
    region = state.region
    if isinstance(state, SparseState):
        return SparseState(region, cqca.layout, state.digits[:, :, :-2], state.amps.copy(),
                           state.t)
    return RegionState(region, cqca.layout, state.amps.copy(), state.classical[:, :-2], state.t)


# -- gate sequences -> CQCA ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SingleGate:
    """Single-cell unitary at ``offset`` of the automaton neighbourhood."""

    matrix: np.ndarray
    offset: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ControlledShift:
    """Controlled NOT generalised to qudits: ``|a, b> -> |a, b + a mod D>``."""

    control: tuple[int, ...]
    target: tuple[int, ...]


def controlled_shift_matrix(D: int) -> np.ndarray:
    M = np.zeros((D * D, D * D))
    for a in range(D):
        for b in range(D):
            M[a * D + (b + a) % D, a * D + b] = 1.0
    return M


def _gate_offsets(gates) -> list[tuple[int, ...]]:
    offs = set()
    for g in gates:
        if isinstance(g, SingleGate):
            offs.add(tuple(g.offset))
        else:
            offs.update((tuple(g.control), tuple(g.target)))
    return sorted(offs)


def gate_sequence_operator(gates, layout: CellLayout, neighborhood: NeighborhoodScheme):
    """Product ``g_m ... g_1`` as a matrix on ``neighborhood`` (lexicographic cells)."""
    D = layout.cell_dimension
    n = neighborhood.size
    dims = [D] * n
    M = sp.identity(D**n, format="csr", dtype=np.complex128)
    for g in gates:
        if isinstance(g, SingleGate):
            G = embed_sparse(np.asarray(g.matrix, dtype=np.complex128),
                             [neighborhood.index(g.offset)], dims)
        else:
            G = embed_sparse(controlled_shift_matrix(D),
                             [neighborhood.index(g.control), neighborhood.index(g.target)], dims)
        M = G @ M
    return M


def gates_to_cqca(gates: Sequence, coloring: Coloring, layout: CellLayout,
                  neighborhood: NeighborhoodScheme | None = None) -> CqcaDefinition:
    """CQCA whose period applies the gate sequence around every lattice cell.

    The sequence acts on the automaton neighbourhood (by default the span
    of the gate offsets plus the origin).  Phases run colour by colour; for
    colour ``c`` each gate becomes one phase acting at the cells that hold
    its target for anchors of colour ``c``.
    """
    if layout.has_classical:
        raise DefinitionError("gate sequences need a fully quantum layout")
    d = coloring.dimension
    D = layout.cell_dimension
    if neighborhood is None:
        offs = set(_gate_offsets(gates)) | {(0,) * d}
        neighborhood = NeighborhoodScheme(tuple(offs))
    if not validate_coloring(coloring):
        raise DefinitionError("colouring is not correct (neighbours share a colour)")
    if not distinct_in_translates(coloring, neighborhood.offsets):
        raise DefinitionError("colouring repeats a colour inside a neighbourhood translate")
    cq_nb = NeighborhoodScheme.von_neumann(d)
    n = cq_nb.size
    centre = cq_nb.center
    dims = [D] * n
    ops, colors = [], []
    if not gates:
        return CqcaDefinition(layout, coloring, (), (), name="identity")
    for c in range(coloring.k):
        for g in gates:
            target = tuple(g.offset) if isinstance(g, SingleGate) else tuple(g.target)
            seen = coloring.neighbor_map(target).get(c)
            if seen is None:
                continue
            if len(seen) != 1:
                raise DefinitionError(f"colour at offset {target} is not determined by the "
                                      f"anchor colour {c}")
            tc = next(iter(seen))
            back = coloring.neighbor_map(tuple(-v for v in target)).get(tc, set())
            if back != {c}:
                raise DefinitionError(f"colour at offset {target} does not identify the "
                                      f"anchor colour {c}")
            if isinstance(g, SingleGate):
                G = embed_sparse(np.asarray(g.matrix, dtype=np.complex128), [centre], dims)
            else:
                rel = tuple(a - b for a, b in zip(g.control, g.target))
                if sum(abs(v) for v in rel) != 1:
                    raise DefinitionError("controlled gates must join cells at distance 1")
                G = embed_sparse(controlled_shift_matrix(D), [cq_nb.index(rel), centre], dims)
            ops.append(G)
            colors.append(tc)
    return CqcaDefinition(layout, coloring, tuple(ops), tuple(colors), name="gates",
                          metadata={"neighborhood": neighborhood})
