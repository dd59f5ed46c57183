"""Local operators in matrix form or as classically controlled rules.

A :class:`ControlledRule` describes an operator on ``n_cells`` cells of a
layout that has classical registers: the classical values of all cells
select an :class:`Action`, which assigns new classical values and applies
a unitary block to a few quantum register slots.  This is how operators
far too large to write as matrices (the universal automaton reads five
cells of dimension 432) are stored and executed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .core import CellLayout, DefinitionError, ResourceError, is_operator, mixed_radix_encode

DEFAULT_CONFIG_CAP = 2**16

Slot = tuple[int, int]  # (cell index inside the operator support, register position)


@dataclass(frozen=True, eq=False)
class Action:
    """Effect of a rule for one classical configuration.

    ``classical`` holds the new classical values (flat, cell-major) or
    ``None`` when they are unchanged.  ``block`` acts on ``slots`` in the
    listed order (first slot most significant); ``None`` means identity.
    """

    classical: tuple[int, ...] | None = None
    slots: tuple[Slot, ...] = ()
    block: object = None

    @property
    def is_identity(self) -> bool:
        return self.classical is None and self.block is None


IDENTITY = Action()


def slot_dims(layout: CellLayout, slots: Sequence[Slot]) -> tuple[int, ...]:
    return tuple(layout.registers[r].dim for _, r in slots)


def all_quantum_slots(layout: CellLayout, n_cells: int) -> tuple[Slot, ...]:
    return tuple((k, r) for k in range(n_cells) for r in layout.quantum_positions)


class ControlledRule:
    """Operator on ``n_cells`` cells defined by a function of the classical values.

    ``func`` receives a flat tuple (cell-major, classical registers in
    declaration order) and returns an :class:`Action`.  Results are
    memoised, so ``func`` must be deterministic.
    """

    def __init__(self, layout: CellLayout, n_cells: int, func: Callable[[tuple], Action],
                 name: str = "", params: dict | None = None):
        self.layout = layout
        self.n_cells = int(n_cells)
        self._func = func
        self._cache: dict[tuple, Action] = {}
        self.name = name
        self.params = params or {}

    def __repr__(self):
        return f"ControlledRule({self.name or 'anonymous'}, cells={self.n_cells})"

    @property
    def n_classical(self) -> int:
        return len(self.layout.classical_positions)

    @property
    def config_dims(self) -> tuple[int, ...]:
        return self.layout.classical_dims * self.n_cells

    @property
    def n_configs(self) -> int:
        return math.prod(self.config_dims)

    def configs(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.config_dims))

    def action(self, config) -> Action:
        config = tuple(int(c) for c in config)
        act = self._cache.get(config)
        if act is None:
            act = self._func(config)
            if act is None:
                act = IDENTITY
            self._cache[config] = act
        return act

    def random_configs(self, rng: np.random.Generator, count: int) -> list[tuple[int, ...]]:
        """Uniform samples mixed with near-uniform ones that hit agreement guards."""
        dims = np.array(self.config_dims)
        out = []
        C = self.n_classical
        for i in range(count):
            if i % 2 == 0 or C == 0:
                out.append(tuple(int(v) for v in rng.integers(0, dims)))
                continue
            base = rng.integers(0, dims[:C])
            cfg = np.tile(base, self.n_cells)
            mutate = rng.random(cfg.size) < 0.3
            cfg[mutate] = rng.integers(0, dims[mutate])
            out.append(tuple(int(v) for v in cfg))
        return out


def constant_rule(op, layout: CellLayout, n_cells: int, name: str = "") -> ControlledRule:
    """Rule form of a matrix on a layout without classical registers."""
    if layout.has_classical:
        raise DefinitionError("constant_rule needs a fully quantum layout")
    act = Action(None, all_quantum_slots(layout, n_cells), op)
    return ControlledRule(layout, n_cells, lambda _cfg: act, name=name)


def _cell_join_table(layout: CellLayout) -> np.ndarray:
    """table[c, q] = cell index for classical index c and quantum index q."""
    cdims, qdims = layout.classical_dims, layout.quantum_dims
    C, Q = math.prod(cdims), math.prod(qdims)
    table = np.empty((C, Q), dtype=np.int64)
    for c, cvals in enumerate(itertools.product(*(range(d) for d in cdims))):
        for q, qvals in enumerate(itertools.product(*(range(d) for d in qdims))):
            values = [0] * layout.n_registers
            for pos, v in zip(layout.classical_positions, cvals):
                values[pos] = v
            for pos, v in zip(layout.quantum_positions, qvals):
                values[pos] = v
            table[c, q] = mixed_radix_encode(values, layout.dims)
    return table


def controlled_from_matrix(op, layout: CellLayout, n_cells: int,
                           config_cap: int = DEFAULT_CONFIG_CAP, tol: float = 1e-12,
                           name: str = "") -> ControlledRule:
    """Scan the columns of ``op`` and recover its controlled-permutation structure.

    Every column with classical configuration ``c`` must land in a single
    classical configuration ``c'``; otherwise the matrix would create
    superpositions of classical values and a :class:`DefinitionError` is
    raised.
    """
    if not layout.has_classical:
        return constant_rule(op, layout, n_cells, name)
    cdims, qdims = layout.classical_dims, layout.quantum_dims
    C_cell, Q_cell = math.prod(cdims), math.prod(qdims)
    n_configs = C_cell**n_cells
    if n_configs > config_cap:
        raise ResourceError(f"{n_configs} classical configurations exceed cap {config_cap}")
    D = layout.cell_dimension
    M = sp.csc_matrix(op)
    table = _cell_join_table(layout)
    weights = D ** np.arange(n_cells - 1, -1, -1, dtype=np.int64)
    qgrid = np.array(list(itertools.product(range(Q_cell), repeat=n_cells)), dtype=np.int64)
    qgrid = qgrid.reshape(-1, n_cells)
    Qn = Q_cell**n_cells

    # inverse map: global index -> (classical config index, quantum index)
    cell_c = np.empty(D, dtype=np.int64)
    cell_q = np.empty(D, dtype=np.int64)
    for c in range(C_cell):
        for q in range(Q_cell):
            cell_c[table[c, q]] = c
            cell_q[table[c, q]] = q

    def split(indices):
        digits = np.empty((indices.size, n_cells), dtype=np.int64)
        rest = indices.copy()
        for k in range(n_cells - 1, -1, -1):
            rest, digits[:, k] = np.divmod(rest, D)
        cc = cell_c[digits]
        qq = cell_q[digits]
        cfg = np.zeros(indices.size, dtype=np.int64)
        qi = np.zeros(indices.size, dtype=np.int64)
        for k in range(n_cells):
            cfg = cfg * C_cell + cc[:, k]
            qi = qi * Q_cell + qq[:, k]
        return cfg, qi

    actions: dict[tuple, Action] = {}
    slots = all_quantum_slots(layout, n_cells)
    ident = np.eye(Qn)
    for cfg_cells in itertools.product(range(C_cell), repeat=n_cells):
        cols = (table[list(cfg_cells)][np.arange(n_cells), qgrid] * weights).sum(axis=1)
        sub = M[:, cols].tocoo()
        keep = np.abs(sub.data) > tol
        rows, cidx, vals = sub.row[keep], sub.col[keep], sub.data[keep]
        rcfg, rq = split(rows.astype(np.int64))
        targets = np.unique(rcfg)
        if targets.size > 1:
            raise DefinitionError(
                "operator is not classically controlled: a column mixes classical values"
            )
        block = np.zeros((Qn, Qn), dtype=complex)
        block[rq, cidx] = vals
        src = mixed_radix_encode(cfg_cells, [C_cell] * n_cells)
        dst = int(targets[0]) if targets.size else src
        flat_src = _expand_config(cfg_cells, cdims)
        new_cls = None if dst == src else _expand_config(
            _decode(dst, C_cell, n_cells), cdims)
        if new_cls is None and np.allclose(block, ident, atol=tol, rtol=0):
            actions[flat_src] = IDENTITY
        else:
            actions[flat_src] = Action(new_cls, slots, block)
    return ControlledRule(layout, n_cells, lambda cfg: actions[cfg], name=name)


def _decode(index: int, base: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        index, d = divmod(index, base)
        out.append(d)
    return tuple(reversed(out))


def _expand_config(cell_configs: Sequence[int], cdims: Sequence[int]) -> tuple[int, ...]:
    """Per-cell classical indices -> flat per-register values."""
    out: list[int] = []
    for c in cell_configs:
        out.extend(_mixed(c, cdims))
    return tuple(out)


def _mixed(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    out = []
    for d in reversed(dims):
        index, v = divmod(index, d)
        out.append(v)
    return tuple(reversed(out))


def as_rule(op, layout: CellLayout, n_cells: int, name: str = "") -> ControlledRule:
    if isinstance(op, ControlledRule):
        return op
    if layout.has_classical:
        return controlled_from_matrix(op, layout, n_cells, name=name)
    return constant_rule(op, layout, n_cells, name)


def block_dense(block) -> np.ndarray:
    if sp.issparse(block):
        return block.toarray()
    return np.asarray(block)


def embed_block(act: Action, slots: Sequence[Slot], layout: CellLayout) -> np.ndarray:
    """Matrix of ``act.block`` on the ordered ``slots`` (identity on slots it skips)."""
    dims = slot_dims(layout, slots)
    K = math.prod(dims)
    if act.block is None:
        return np.eye(K, dtype=complex)
    block = block_dense(act.block)
    pos = [slots.index(s) for s in act.slots]
    return embed_dense(block, pos, dims)


def embed_dense(block: np.ndarray, positions: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Embed an operator on ``positions`` of a tensor product with factor ``dims``."""
    n = len(dims)
    positions = list(positions)
    rest = [i for i in range(n) if i not in positions]
    sub = [dims[i] for i in positions]
    rdims = [dims[i] for i in rest]
    full = np.kron(block, np.eye(math.prod(rdims), dtype=complex))
    full = full.reshape(sub + rdims + sub + rdims)
    order = positions + rest
    inv = np.argsort(order)
    full = full.transpose(list(inv) + [n + i for i in inv])
    K = math.prod(dims)
    return full.reshape(K, K)


def materialize(op, layout: CellLayout, n_cells: int, sparse: bool = False,
                config_cap: int = DEFAULT_CONFIG_CAP):
    """Full matrix of an operator in the package basis convention."""
    if is_operator(op):
        if sparse:
            return sp.csr_matrix(op)
        return op.toarray() if sp.issparse(op) else np.asarray(op)
    rule: ControlledRule = op
    D = layout.cell_dimension
    total = D**n_cells
    if rule.n_configs > config_cap or total > 2**22:
        raise ResourceError(f"operator of dimension {total} is too large to materialise")
    table = _cell_join_table(layout)
    cdims = layout.classical_dims
    C_cell, Q_cell = table.shape
    weights = D ** np.arange(n_cells - 1, -1, -1, dtype=np.int64)
    qgrid = np.array(list(itertools.product(range(Q_cell), repeat=n_cells)),
                     dtype=np.int64).reshape(-1, n_cells)
    slots = all_quantum_slots(layout, n_cells)
    rows, cols, vals = [], [], []
    for cfg_cells in itertools.product(range(C_cell), repeat=n_cells):
        flat = _expand_config(cfg_cells, cdims) if cdims else ()
        act = rule.action(flat)
        block = embed_block(act, slots, layout)
        if act.classical is None:
            dst_cells = cfg_cells
        else:
            dst_cells = tuple(
                mixed_radix_encode(act.classical[k * len(cdims):(k + 1) * len(cdims)], cdims)
                for k in range(n_cells)
            )
        src = (table[list(cfg_cells)][np.arange(n_cells), qgrid] * weights).sum(axis=1)
        dst = (table[list(dst_cells)][np.arange(n_cells), qgrid] * weights).sum(axis=1)
        r, c = np.nonzero(block)
        rows.append(dst[r])
        cols.append(src[c])
        vals.append(block[r, c])
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(total, total))
    return M if sparse else M.toarray()
