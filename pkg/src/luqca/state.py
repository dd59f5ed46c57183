"""Region states: dense hybrid vectors and sparse basis maps.

Both kinds keep the lattice region, the cell layout and a step counter.
``RegionState`` stores one dense amplitude tensor over every quantum
register slot of the region plus a definite classical assignment.
``SparseState`` stores a list of basis configurations (all registers,
classical ones included) with their amplitudes; it is used when only a
few basis states are occupied, e.g. a single particle on a long line.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .core import (
    BlockInitializer,
    BoundaryLeakError,
    CellLayout,
    DefinitionError,
    Region,
    ResourceError,
    amplitude_cap,
    digits_array,
    mixed_radix_decode,
    strides_for,
)
from .operators import Action, block_dense, slot_dims

NORM_TOL = 1e-9


@lru_cache(maxsize=256)
def _gather_indices(dims: tuple[int, ...], axes: tuple[int, ...]):
    """Outer and local flat offsets for a block acting on ``axes`` of a tensor."""
    strides = strides_for(dims)
    local = np.zeros(1, dtype=np.intp)
    for a in axes:
        local = (local[:, None] + strides[a] * np.arange(dims[a])).ravel()
    outer = np.zeros(1, dtype=np.intp)
    for a in range(len(dims)):
        if a in axes:
            continue
        outer = (outer[:, None] + strides[a] * np.arange(dims[a])).ravel()
    return np.ascontiguousarray(outer), np.ascontiguousarray(local)


def compress_block(block, slots, exterior: Sequence[bool], fixed: Sequence[int],
                   dims: Sequence[int]):
    """Restrict ``block`` to the subspace where exterior slots hold ``fixed`` digits.

    Returns ``(sub_block, kept_slot_positions)``.  The result is generally
    not unitary: the missing weight is amplitude that would leave the
    region.
    """
    keep = [i for i, ext in enumerate(exterior) if not ext]
    if len(keep) == len(slots):
        return block, keep
    strides = strides_for(dims)
    base = sum(int(fixed[i]) * int(strides[i]) for i in range(len(slots)) if exterior[i])
    sub = np.zeros(1, dtype=np.int64) + base
    for i in keep:
        sub = (sub[:, None] + strides[i] * np.arange(dims[i])).ravel()
    if sp.issparse(block):
        small = block.tocsr()[sub][:, sub]
        if small.shape[0] <= 1024:
            small = small.toarray()
        return small, keep
    return np.asarray(block)[np.ix_(sub, sub)], keep


def _is_identity(block, tol=1e-14) -> bool:
    if sp.issparse(block):
        diff = block - sp.identity(block.shape[0], format="csr")
        return diff.count_nonzero() == 0 or np.abs(diff.data).max() <= tol
    block = np.asarray(block)
    return np.abs(block - np.eye(block.shape[0])).max() <= tol


class _StateBase:
    region: Region
    layout: CellLayout
    t: int

    @property
    def n_cells(self) -> int:
        return self.region.n_cells



class RegionState(_StateBase):
    """Dense amplitudes over the quantum slots plus classical register values.

    ``amps`` has one axis per quantum slot (cells lexicographic, quantum
    registers in declaration order).  ``classical`` is an int array of shape
    ``(n_cells, n_classical)``.
    """

    def __init__(self, region: Region, layout: CellLayout, amps: np.ndarray,
                 classical: np.ndarray | None = None, t: int = 0):
        self.region = region
        self.layout = layout
        self.qdims = layout.quantum_dims
        self.nq = len(self.qdims)
        self.tensor_dims = self.qdims * region.n_cells
        size = math.prod(self.tensor_dims)
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if amps.size != size:
            raise DefinitionError(f"amplitude vector has {amps.size} entries, expected {size}")
        self.amps = amps
        nc = len(layout.classical_positions)
        if classical is None:
            classical = np.zeros((region.n_cells, nc), dtype=np.int64)
        classical = np.asarray(classical, dtype=np.int64).reshape(region.n_cells, nc)
        for j, d in enumerate(layout.classical_dims):
            if classical.size and (classical[:, j].min() < 0 or classical[:, j].max() >= d):
                raise DefinitionError("classical value out of range")
        self.classical = classical
        self.t = int(t)

    def __repr__(self):
        return (f"RegionState(shape={self.region.shape}, boundary={self.region.boundary}, "
                f"amplitudes={self.amps.size}, t={self.t})")

    @classmethod
    def zeros_like_layout(cls, region: Region, layout: CellLayout) -> "RegionState":
        size = math.prod(layout.quantum_dims * region.n_cells)
        _check_cap(size)
        amps = np.zeros(size, dtype=np.complex128)
        return cls(region, layout, amps)

    def copy(self) -> "RegionState":
        return RegionState(self.region, self.layout, self.amps.copy(), self.classical.copy(), self.t)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def axis(self, position: int, reg: int) -> int:
        return position * self.nq + self.layout.quantum_positions.index(reg)

    def full_vector(self) -> np.ndarray:
        """Amplitudes over the full register basis (classical ones included)."""
        D = self.layout.cell_dimension
        total = D**self.n_cells
        _check_cap(total)
        out = np.zeros(total, dtype=np.complex128)
        qdigits = digits_array(np.arange(self.amps.size), self.tensor_dims)
        L = self.layout
        idx = np.zeros(self.amps.size, dtype=np.int64)
        for p in range(self.n_cells):
            values = np.zeros((self.amps.size, L.n_registers), dtype=np.int64)
            for j, pos in enumerate(L.classical_positions):
                values[:, pos] = self.classical[p, j]
            for j, pos in enumerate(L.quantum_positions):
                values[:, pos] = qdigits[:, p * self.nq + j]
            cell = np.zeros(self.amps.size, dtype=np.int64)
            for pos in range(L.n_registers):
                cell = cell * L.dims[pos] + values[:, pos]
            idx = idx * D + cell
        out[idx] = self.amps
        return out

    @classmethod
    def from_full_vector(cls, region: Region, layout: CellLayout, vec: np.ndarray,
                         tol: float = 1e-12) -> "RegionState":
        """Inverse of :meth:`full_vector`; the classical part must be definite."""
        vec = np.asarray(vec, dtype=np.complex128)
        support = np.flatnonzero(np.abs(vec) > tol)
        if support.size == 0:
            raise DefinitionError("zero vector")
        D = layout.cell_dimension
        digits = digits_array(support, [D] * region.n_cells)
        cells = [[layout.decode(int(d)) for d in row] for row in digits]
        cpos = layout.classical_positions
        cls_vals = {tuple(tuple(c[i] for i in cpos) for c in row) for row in cells}
        if len(cls_vals) != 1:
            raise DefinitionError("classical registers are in superposition")
        classical = np.array(next(iter(cls_vals)), dtype=np.int64).reshape(region.n_cells, len(cpos))
        state = cls.zeros_like_layout(region, layout)
        state.classical = classical
        tdims = state.tensor_dims
        for k, row in zip(support, cells):
            q = [c[i] for c in row for i in layout.quantum_positions]
            flat = 0
            for v, d in zip(q, tdims):
                flat = flat * d + v
            state.amps[flat] = vec[k]
        return state

    def apply_action(self, positions: Sequence[int | None], act: Action,
                     quiescent_values: Sequence[int] | None, backend=None) -> float:
        """Apply ``act`` to the cells at ``positions`` (``None`` = exterior, quiescent).

        Returns the squared norm removed by compression at the boundary.
        """
        L = self.layout
        if act.classical is not None:
            nc = len(L.classical_positions)
            for k, p in enumerate(positions):
                new = act.classical[k * nc:(k + 1) * nc]
                if p is None:
                    q_cls = [quiescent_values[i] for i in L.classical_positions]
                    if list(new) != q_cls:
                        raise BoundaryLeakError("classical registers leave the quiescent state "
                                                "outside the region")
                else:
                    self.classical[p] = new
        if act.block is None:
            return 0.0
        slots = act.slots
        dims = slot_dims(L, slots)
        exterior = [positions[k] is None for k, _ in slots]
        block = act.block
        keep = list(range(len(slots)))
        if any(exterior):
            fixed = [quiescent_values[r] if ext else 0 for (k, r), ext in zip(slots, exterior)]
            block, keep = compress_block(block, slots, exterior, fixed, dims)
            if not keep:
                factor = complex(block_dense(block).reshape(-1)[0])
                before = float(np.vdot(self.amps, self.amps).real)
                self.amps *= factor
                return before * (1.0 - abs(factor) ** 2)
            if _is_identity(block):
                return 0.0
        axes = tuple(self.axis(positions[slots[i][0]], slots[i][1]) for i in keep)
        outer, local = _gather_indices(self.tensor_dims, axes)
        before = float(np.vdot(self.amps, self.amps).real) if any(exterior) else 0.0
        if sp.issparse(block):
            idx = outer[:, None] + local[None, :]
            out = self.amps.copy()
            out[idx] = (block @ self.amps[idx].T).T
            self.amps = out
        else:
            self.amps = _kernels.apply_gathered(self.amps, outer, local, block, backend=backend)
        if any(exterior):
            return before - float(np.vdot(self.amps, self.amps).real)
        return 0.0

    def to_sparse(self, tol: float = 0.0) -> "SparseState":
        support = np.flatnonzero(np.abs(self.amps) > tol)
        qd = digits_array(support, self.tensor_dims)
        L = self.layout
        digits = np.zeros((support.size, self.n_cells, L.n_registers), dtype=np.int64)
        for p in range(self.n_cells):
            for j, pos in enumerate(L.classical_positions):
                digits[:, p, pos] = self.classical[p, j]
            for j, pos in enumerate(L.quantum_positions):
                digits[:, p, pos] = qd[:, p * self.nq + j]
        return SparseState(self.region, L, digits, self.amps[support].copy(), self.t)


def _check_cap(size: int) -> None:
    cap = amplitude_cap()
    if size > cap:
        raise ResourceError(f"{size} amplitudes exceed the dense cap {cap} "
                            f"(set LUQCA_AMPLITUDE_CAP to raise it)")


def unique_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted unique rows and the inverse map (fast ``np.unique(axis=0)``)."""
    m = a.shape[0]
    if m == 1 or a.shape[1] == 0:
        return a[:1].copy() if m else a.copy(), np.zeros(m, dtype=np.int64)
    order = np.lexsort(a.T[::-1])
    srt = a[order]
    new = np.empty(m, dtype=bool)
    new[0] = True
    np.any(srt[1:] != srt[:-1], axis=1, out=new[1:])
    ids = np.cumsum(new) - 1
    inverse = np.empty(m, dtype=np.int64)
    inverse[order] = ids
    return srt[new], inverse


class SparseState(_StateBase):
    """Superposition of explicitly listed basis configurations.

    ``digits`` has shape ``(m, n_cells, n_registers)``; ``amps`` shape ``(m,)``.
    Configurations are kept unique after every operation.
    """

    def __init__(self, region: Region, layout: CellLayout, digits: np.ndarray,
                 amps: np.ndarray, t: int = 0, prune: float = 0.0):
        self.region = region
        self.layout = layout
        digits = np.asarray(digits, dtype=np.int64).reshape(-1, region.n_cells, layout.n_registers)
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if digits.shape[0] != amps.size:
            raise DefinitionError("digits and amplitudes disagree in length")
        self.digits = digits
        self.amps = amps
        self.t = int(t)
        self.prune = prune
        self._dedupe()

    def __repr__(self):
        return f"SparseState(shape={self.region.shape}, terms={self.amps.size}, t={self.t})"

    @classmethod
    def basis(cls, region: Region, layout: CellLayout, assignment) -> "SparseState":
        digits = np.array([layout.decode(c) if isinstance(c, (int, np.integer)) else c
                           for c in assignment], dtype=np.int64)
        return cls(region, layout, digits[None], np.ones(1))

    def copy(self) -> "SparseState":
        return SparseState(self.region, self.layout, self.digits.copy(), self.amps.copy(),
                           self.t, self.prune)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def cell_indices(self) -> np.ndarray:
        """(m, n_cells) array of cell basis indices."""
        out = np.zeros(self.digits.shape[:2], dtype=np.int64)
        for pos, d in enumerate(self.layout.dims):
            out = out * d + self.digits[:, :, pos]
        return out

    def _dedupe(self):
        if self.amps.size == 0:
            return
        flat = self.digits.reshape(self.digits.shape[0], -1)
        uniq, inverse = unique_rows(flat)
        if uniq.shape[0] != flat.shape[0]:
            amps = np.zeros(uniq.shape[0], dtype=np.complex128)
            np.add.at(amps, inverse, self.amps)
        else:
            order = np.empty_like(inverse)
            order[inverse] = np.arange(inverse.size)
            amps = self.amps[order]
        keep = np.abs(amps) > self.prune
        self.digits = uniq[keep].reshape(-1, self.region.n_cells, self.layout.n_registers)
        self.amps = amps[keep]

    def full_vector(self) -> np.ndarray:
        D = self.layout.cell_dimension
        total = D**self.n_cells
        _check_cap(total)
        idx = np.zeros(self.amps.size, dtype=np.int64)
        for col in self.cell_indices().T:
            idx = idx * D + col
        out = np.zeros(total, dtype=np.complex128)
        np.add.at(out, idx, self.amps)
        return out

    def to_dense(self) -> RegionState:
        return RegionState.from_full_vector(self.region, self.layout, self.full_vector())

    def apply_action_groups(self, positions: Sequence[int | None], rule,
                            quiescent_values: Sequence[int] | None) -> float:
        """Apply a rule at one placement to every configuration; returns leaked weight."""
        L = self.layout
        n = len(positions)
        m = self.amps.size
        if m == 0:
            return 0.0
        local = np.empty((m, n, L.n_registers), dtype=np.int64)
        for k, p in enumerate(positions):
            if p is None:
                local[:, k, :] = quiescent_values
            else:
                local[:, k, :] = self.digits[:, p, :]
        cpos = list(L.classical_positions)
        if cpos:
            ccfg = local[:, :, cpos].reshape(m, -1)
            groups_keys, inverse = unique_rows(ccfg)
            groups = [(tuple(int(v) for v in key), np.flatnonzero(inverse == g))
                      for g, key in enumerate(groups_keys)]
        else:
            groups = [((), np.arange(m))]
        new_digits, new_amps = [], []
        before = float(np.vdot(self.amps, self.amps).real)
        for cfg, rows in groups:
            act = rule.action(cfg)
            d = self.digits[rows].copy()
            a = self.amps[rows]
            loc = local[rows]
            if act.classical is not None:
                nc = len(cpos)
                for k, p in enumerate(positions):
                    new = act.classical[k * nc:(k + 1) * nc]
                    if p is None:
                        if any(new[j] != quiescent_values[pos] for j, pos in enumerate(cpos)):
                            raise BoundaryLeakError("classical registers leave the quiescent "
                                                    "state outside the region")
                    else:
                        d[:, p, cpos] = new
            if act.block is None:
                new_digits.append(d)
                new_amps.append(a)
                continue
            slots = act.slots
            dims = slot_dims(L, slots)
            strides = strides_for(dims)
            li = np.zeros(rows.size, dtype=np.int64)
            for (k, r), s in zip(slots, strides):
                li += loc[:, k, r] * s
            block = act.block
            if sp.issparse(block):
                cols = sp.csc_matrix(block)[:, li].tocoo()
                out_row, entry, vals = cols.row, cols.col, cols.data
            else:
                cols = np.asarray(block)[:, li]
                out_row, entry = np.nonzero(cols)
                vals = cols[out_row, entry]
            out_digits = digits_array(out_row, dims)
            dd = d[entry]
            ok = np.ones(entry.size, dtype=bool)
            for i, (k, r) in enumerate(slots):
                p = positions[k]
                if p is None:
                    ok &= out_digits[:, i] == quiescent_values[r]
                else:
                    dd[:, p, r] = out_digits[:, i]
            new_digits.append(dd[ok])
            new_amps.append(a[entry[ok]] * vals[ok])
        self.digits = np.concatenate(new_digits, axis=0)
        self.amps = np.concatenate(new_amps)
        self._dedupe()
        return before - float(np.vdot(self.amps, self.amps).real)


def product_state(region: Region, layout: CellLayout, cell_states: Sequence) -> RegionState:
    """Product of per-cell states; each entry is a cell basis index or a vector.

    Vectors are over the full cell basis and must be supported on one
    classical value assignment.
    """
    if len(cell_states) != region.n_cells:
        raise DefinitionError(f"expected {region.n_cells} cell states")
    vec = np.ones(1, dtype=np.complex128)
    classical = np.zeros((region.n_cells, len(layout.classical_positions)), dtype=np.int64)
    _check_cap(math.prod(layout.quantum_dims * region.n_cells))
    for p, cs in enumerate(cell_states):
        qvec, cvals = _cell_quantum_vector(layout, cs)
        classical[p] = cvals
        vec = np.kron(vec, qvec)
    return RegionState(region, layout, vec, classical)


def _cell_quantum_vector(layout: CellLayout, cell_state):
    Q = layout.quantum_dimension
    if isinstance(cell_state, (int, np.integer)):
        cvals, qidx = layout.split(int(cell_state))
        vec = np.zeros(Q, dtype=np.complex128)
        vec[qidx] = 1.0
        return vec, cvals
    cell_state = np.asarray(cell_state, dtype=np.complex128)
    if cell_state.size != layout.cell_dimension:
        raise DefinitionError("cell state has the wrong dimension")
    support = np.flatnonzero(np.abs(cell_state) > 0)
    parts = [layout.split(int(i)) for i in support]
    cvals = {c for c, _ in parts}
    if len(cvals) != 1:
        raise DefinitionError("cell state superposes classical register values")
    vec = np.zeros(Q, dtype=np.complex128)
    for i, (_, q) in zip(support, parts):
        vec[q] = cell_state[i]
    return vec, next(iter(cvals))


def basis_state(region: Region, layout: CellLayout, assignment: Sequence) -> RegionState:
    cells = [layout.encode(a) if not isinstance(a, (int, np.integer)) else int(a)
             for a in assignment]
    return product_state(region, layout, cells)


def random_state(region: Region, layout: CellLayout, rng: np.random.Generator,
                 classical: np.ndarray | None = None) -> RegionState:
    size = math.prod(layout.quantum_dims * region.n_cells)
    _check_cap(size)
    vec = rng.normal(size=size) + 1j * rng.normal(size=size)
    vec /= np.linalg.norm(vec)
    return RegionState(region, layout, vec, classical)


def init_region(init: BlockInitializer, region: Region, layout: CellLayout) -> RegionState:
    """Tensor product of block states and the default fill over ``region``.

    Cells are grouped into blocks ``z*k ... z*k + k - 1`` per axis.  A block
    listed in ``init.blocks`` must lie entirely inside the region.
    """
    k = init.k
    d = region.dimension
    D = layout.cell_dimension
    covered: dict[tuple, tuple] = {}
    for z, vec in init.blocks.items():
        z = (z,) if isinstance(z, (int, np.integer)) else tuple(z)
        if len(z) != d:
            raise DefinitionError(f"block coordinate {z} has the wrong dimension")
        vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
        if vec.size != D ** (k**d):
            raise DefinitionError(f"block state at {z} has dimension {vec.size}, "
                                  f"expected {D ** (k**d)}")
        if abs(np.linalg.norm(vec) - 1.0) > NORM_TOL:
            raise DefinitionError(f"block state at {z} is not normalised")
        cells = [tuple(zi * k + o for zi, o in zip(z, off))
                 for off in itertools.product(range(k), repeat=d)]
        for c in cells:
            if not region.contains(c):
                raise DefinitionError(f"block {z} is not inside the region")
        covered[z] = (cells, vec)
    # start with the fill everywhere, then overwrite blocks by contraction
    state = product_state(region, layout, [init.fill] * region.n_cells)
    if not covered:
        return state
    if layout.has_classical:
        raise DefinitionError("block states are only supported on fully quantum layouts")
    positions = {c: region.position(c) for blk in covered.values() for c in blk[0]}
    owner = {}
    for z, (cells, vec) in covered.items():
        for c in cells:
            owner[positions[c]] = z
    fill_vec = np.zeros(D, dtype=np.complex128)
    fill_vec[init.fill] = 1.0
    factors = []
    axes_order = []
    for z, (cells, vec) in covered.items():
        factors.append(vec.reshape([D] * len(cells)))
        axes_order.extend(positions[c] for c in cells)
    for p in range(region.n_cells):
        if p not in owner:
            factors.append(fill_vec)
            axes_order.append(p)
    result = factors[0]
    for f in factors[1:]:
        result = np.multiply.outer(result, f)
    tensor = np.transpose(result, np.argsort(axes_order))
    return RegionState(region, layout, tensor.reshape(-1), state.classical)


def cell_digits(layout: CellLayout, index: int) -> tuple[int, ...]:
    return mixed_radix_decode(index, layout.dims)
