"""Lattice, cell and automaton definitions shared by every other module.

Basis convention used everywhere in the package: cells are ordered
lexicographically by coordinate (most significant first) and, inside a
cell, registers are taken in declaration order, also most significant
first.  The read operator of a definition acts on the neighbourhood cells
in lexicographic offset order under the same mixed-radix convention.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-9
DEFAULT_AMPLITUDE_CAP = 2**24

QUIESCENT = "quiescent"
TORUS = "torus"
BOUNDARY_MODES = (QUIESCENT, TORUS)


class LuqcaError(Exception):
    """Base class for errors raised by the package."""


class DefinitionError(LuqcaError, ValueError):
    """A definition is structurally inconsistent (wrong shapes, bad registers)."""


class ResourceError(LuqcaError):
    """A computation would exceed a configured size cap."""


class BoundaryLeakError(LuqcaError):
    """Amplitude left a quiescent-padded region."""


def amplitude_cap() -> int:
    """Dense amplitude cap, overridable with ``LUQCA_AMPLITUDE_CAP``."""
    value = os.environ.get("LUQCA_AMPLITUDE_CAP")
    return int(value) if value else DEFAULT_AMPLITUDE_CAP


def mixed_radix_encode(digits: Sequence[int], dims: Sequence[int]) -> int:
    index = 0
    for digit, dim in zip(digits, dims):
        index = index * dim + int(digit)
    return index


def mixed_radix_decode(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    digits = []
    for dim in reversed(dims):
        index, digit = divmod(index, dim)
        digits.append(digit)
    if index:
        raise ValueError("index out of range for the given dimensions")
    return tuple(reversed(digits))


def digits_array(indices: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Vectorised mixed-radix decode; returns shape (len(indices), len(dims))."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.size, len(dims)), dtype=np.int64)
    rest = indices.copy()
    for pos in range(len(dims) - 1, -1, -1):
        rest, out[:, pos] = np.divmod(rest, dims[pos])
    return out


def strides_for(dims: Sequence[int]) -> np.ndarray:
    strides = np.ones(len(dims), dtype=np.int64)
    for pos in range(len(dims) - 2, -1, -1):
        strides[pos] = strides[pos + 1] * dims[pos + 1]
    return strides


@dataclass(frozen=True)
class Register:
    name: str
    dim: int
    classical: bool = False

    def __post_init__(self):
        if self.dim < 1 or (self.dim < 2 and not self.classical):
            raise DefinitionError(
                f"register {self.name!r}: dimension {self.dim} (quantum registers need >= 2)"
            )


class CellLayout:
    """Ordered registers of one cell.

    Registers flagged ``classical`` always hold definite values; the
    engine stores them outside the amplitude vector.
    """

    def __init__(self, registers: Iterable[Register | tuple]):
        regs = []
        for reg in registers:
            regs.append(reg if isinstance(reg, Register) else Register(*reg))
        if not regs:
            raise DefinitionError("a cell needs at least one register")
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise DefinitionError(f"duplicate register names in {names}")
        self.registers: tuple[Register, ...] = tuple(regs)

    @classmethod
    def single(cls, dim: int, name: str = "q") -> "CellLayout":
        return cls([Register(name, dim)])

    def __repr__(self):
        inner = ", ".join(
            f"{r.name}:{r.dim}{'c' if r.classical else ''}" for r in self.registers
        )
        return f"CellLayout({inner})"

    def __eq__(self, other):
        return isinstance(other, CellLayout) and self.registers == other.registers

    def __hash__(self):
        return hash(self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def cell_dimension(self) -> int:
        return math.prod(self.dims)

    @property
    def n_registers(self) -> int:
        return len(self.registers)

    @cached_property
    def quantum_positions(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.registers) if not r.classical)

    @cached_property
    def classical_positions(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.registers) if r.classical)

    @property
    def quantum_dims(self) -> tuple[int, ...]:
        return tuple(self.registers[i].dim for i in self.quantum_positions)

    @property
    def classical_dims(self) -> tuple[int, ...]:
        return tuple(self.registers[i].dim for i in self.classical_positions)

    @property
    def quantum_dimension(self) -> int:
        return math.prod(self.quantum_dims)

    @property
    def has_classical(self) -> bool:
        return bool(self.classical_positions)

    def index_of(self, name: str) -> int:
        for i, reg in enumerate(self.registers):
            if reg.name == name:
                return i
        raise KeyError(f"no register named {name!r}")

    def encode(self, values: Sequence[int]) -> int:
        if len(values) != self.n_registers:
            raise ValueError(f"expected {self.n_registers} register values, got {len(values)}")
        for value, reg in zip(values, self.registers):
            if not 0 <= int(value) < reg.dim:
                raise ValueError(f"value {value} out of range for register {reg.name!r}")
        return mixed_radix_encode(values, self.dims)

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.cell_dimension:
            raise ValueError(f"cell index {index} out of range")
        return mixed_radix_decode(index, self.dims)

    def split(self, index: int) -> tuple[tuple[int, ...], int]:
        """Cell index -> (classical values, quantum index)."""
        values = self.decode(index)
        cvals = tuple(values[i] for i in self.classical_positions)
        qidx = mixed_radix_encode([values[i] for i in self.quantum_positions], self.quantum_dims)
        return cvals, qidx

    def join(self, cvals: Sequence[int], qidx: int) -> int:
        values = [0] * self.n_registers
        for pos, value in zip(self.classical_positions, cvals):
            values[pos] = value
        for pos, value in zip(self.quantum_positions, mixed_radix_decode(qidx, self.quantum_dims)):
            values[pos] = value
        return self.encode(values)

    def as_quantum(self) -> "CellLayout":
        """Same registers with every classical flag cleared (dims of 1 kept as 2)."""
        return CellLayout(Register(r.name, max(r.dim, 2) if r.classical and r.dim < 2 else r.dim)
                          for r in self.registers)


@dataclass(frozen=True)
class NeighborhoodScheme:
    """Finite set of lattice offsets; always contains the origin."""

    offsets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        offs = [tuple(int(c) for c in o) for o in self.offsets]
        if not offs:
            raise DefinitionError("empty neighbourhood")
        d = len(offs[0])
        if d < 1 or any(len(o) != d for o in offs):
            raise DefinitionError("offsets must all have the same positive dimension")
        if len(set(offs)) != len(offs):
            raise DefinitionError("duplicate offsets")
        if (0,) * d not in offs:
            raise DefinitionError("the zero offset must belong to the neighbourhood")
        object.__setattr__(self, "offsets", tuple(sorted(offs)))

    @classmethod
    def interval(cls, lo: int, hi: int) -> "NeighborhoodScheme":
        return cls(tuple((i,) for i in range(lo, hi + 1)))

    @classmethod
    def von_neumann(cls, d: int, radius: int = 1) -> "NeighborhoodScheme":
        rng = range(-radius, radius + 1)
        return cls(tuple(o for o in itertools.product(rng, repeat=d)
                         if sum(abs(c) for c in o) <= radius))

    @property
    def dimension(self) -> int:
        return len(self.offsets[0])

    @property
    def size(self) -> int:
        return len(self.offsets)

    @property
    def lower(self) -> tuple[int, ...]:
        return tuple(min(o[a] for o in self.offsets) for a in range(self.dimension))

    @property
    def upper(self) -> tuple[int, ...]:
        return tuple(max(o[a] for o in self.offsets) for a in range(self.dimension))

    @property
    def diameter(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lower, self.upper))

    @property
    def reach(self) -> tuple[int, ...]:
        """Per-axis distance information can travel in one step (extent of N - N)."""
        return tuple(h - l for l, h in zip(self.lower, self.upper))

    def index(self, offset: Sequence[int]) -> int:
        return self.offsets.index(tuple(offset))

    @property
    def center(self) -> int:
        return self.index((0,) * self.dimension)

    def differences(self) -> list[tuple[int, ...]]:
        """Nonzero translations under which the neighbourhood overlaps itself."""
        diffs = {tuple(a - b for a, b in zip(x, y)) for x in self.offsets for y in self.offsets}
        diffs.discard((0,) * self.dimension)
        return sorted(diffs)


@dataclass(frozen=True)
class Region:
    """Axis-aligned box of cells, corners inclusive."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]
    boundary: str = QUIESCENT

    def __post_init__(self):
        lo = tuple(int(c) for c in self.lower)
        hi = tuple(int(c) for c in self.upper)
        if len(lo) != len(hi) or not lo:
            raise DefinitionError("region corners must have the same positive dimension")
        if any(l > h for l, h in zip(lo, hi)):
            raise DefinitionError(f"region lower corner {lo} exceeds upper {hi}")
        if self.boundary not in BOUNDARY_MODES:
            raise DefinitionError(f"boundary must be one of {BOUNDARY_MODES}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def line(cls, n: int, start: int = 0, boundary: str = QUIESCENT) -> "Region":
        return cls((start,), (start + n - 1,), boundary)

    @classmethod
    def box(cls, shape: Sequence[int], boundary: str = QUIESCENT,
            origin: Sequence[int] | None = None) -> "Region":
        origin = tuple(origin) if origin is not None else (0,) * len(shape)
        return cls(origin, tuple(o + s - 1 for o, s in zip(origin, shape)), boundary)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lower, self.upper))

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)

    @cached_property
    def cells(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(*(range(l, h + 1) for l, h in zip(self.lower, self.upper))))

    @cached_property
    def _positions(self) -> dict:
        return {c: i for i, c in enumerate(self.cells)}

    def contains(self, cell: Sequence[int]) -> bool:
        return all(l <= c <= h for c, l, h in zip(cell, self.lower, self.upper))

    def wrap(self, cell: Sequence[int]) -> tuple[int, ...]:
        return tuple(l + (c - l) % s for c, l, s in zip(cell, self.lower, self.shape))

    def position(self, cell: Sequence[int]) -> int:
        """Lexicographic position of a cell (wrapped first in torus mode)."""
        cell = tuple(cell)
        if self.boundary == TORUS:
            cell = self.wrap(cell)
        try:
            return self._positions[cell]
        except KeyError:
            raise KeyError(f"cell {cell} outside region") from None

    def with_boundary(self, boundary: str) -> "Region":
        return Region(self.lower, self.upper, boundary)

    def expanded(self, left: Sequence[int], right: Sequence[int] | None = None) -> "Region":
        right = left if right is None else right
        return Region(tuple(l - a for l, a in zip(self.lower, left)),
                      tuple(h + b for h, b in zip(self.upper, right)), self.boundary)

    def check_torus(self, neighborhood: NeighborhoodScheme) -> None:
        if self.boundary != TORUS:
            return
        for axis, (length, diam) in enumerate(zip(self.shape, neighborhood.diameter)):
            if length < diam:
                raise DefinitionError(
                    f"torus axis {axis} has length {length} < neighbourhood diameter {diam}"
                )


def is_operator(obj) -> bool:
    return isinstance(obj, np.ndarray) or sp.issparse(obj)


@dataclass(frozen=True, eq=False)
class QcaDefinition:
    """A local unitary QCA: read operator on the neighbourhood, update on one cell.

    ``read`` and ``update`` are square matrices (dense or scipy sparse) in
    the package basis convention, or :class:`luqca.operators.ControlledRule`
    objects for automata too large to write down as matrices.
    """

    layout: CellLayout
    neighborhood: NeighborhoodScheme
    read: Any
    update: Any
    quiescent: int | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        from .operators import ControlledRule

        D = self.layout.cell_dimension
        n = self.neighborhood.size
        for label, op, cells in (("read", self.read, n), ("update", self.update, 1)):
            if isinstance(op, ControlledRule):
                if op.layout != self.layout or op.n_cells != cells:
                    raise DefinitionError(f"{label} rule does not match layout/neighbourhood")
                continue
            if not is_operator(op):
                raise DefinitionError(f"{label} operator must be a matrix or ControlledRule")
            expected = D**cells
            if op.shape != (expected, expected):
                raise DefinitionError(
                    f"{label} operator has shape {op.shape}, expected ({expected}, {expected})"
                )
            if isinstance(op, np.ndarray) and not np.all(np.isfinite(op)):
                raise DefinitionError(f"{label} operator has non-finite entries")
        if self.quiescent is not None and not 0 <= self.quiescent < D:
            raise DefinitionError(f"quiescent index {self.quiescent} out of range")

    @property
    def dimension(self) -> int:
        return self.neighborhood.dimension

    @cached_property
    def read_rule(self):
        from .operators import as_rule

        return as_rule(self.read, self.layout, self.neighborhood.size)

    @cached_property
    def update_rule(self):
        from .operators import as_rule

        return as_rule(self.update, self.layout, 1)

    def read_matrix(self, sparse: bool = False):
        from .operators import materialize

        return materialize(self.read, self.layout, self.neighborhood.size, sparse=sparse)

    def update_matrix(self, sparse: bool = False):
        from .operators import materialize

        return materialize(self.update, self.layout, 1, sparse=sparse)

    def as_quantum(self) -> "QcaDefinition":
        """Same automaton with every register treated as quantum (for dense cross-checks)."""
        return QcaDefinition(
            self.layout.as_quantum(), self.neighborhood,
            self.read_matrix(sparse=True), self.update_matrix(sparse=True),
            self.quiescent, self.name, dict(self.metadata),
        )


@dataclass(frozen=True)
class BlockInitializer:
    """Initial state built from independent blocks of side ``k``.

    ``blocks`` maps a block coordinate ``z`` (cells ``z*k ... z*k + k - 1``
    per axis) to a state vector on the ``k**d`` cells of that block, cells
    in lexicographic order.  Every other cell is set to the basis state
    ``fill`` (a cell index, typically the quiescent one).
    """

    k: int = 1
    blocks: dict = field(default_factory=dict)
    fill: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DefinitionError("block side must be >= 1")


def basis_index(layout: CellLayout, region: Region, assignment: Sequence) -> int:
    """Global basis index of a per-cell register assignment.

    ``assignment`` lists, per cell in lexicographic order, either a tuple of
    register values or a single int for one-register layouts.
    """
    if len(assignment) != region.n_cells:
        raise ValueError(f"expected {region.n_cells} cell assignments, got {len(assignment)}")
    index = 0
    D = layout.cell_dimension
    for values in assignment:
        if isinstance(values, (int, np.integer)):
            values = (int(values),)
        index = index * D + layout.encode(values)
    return index


def basis_decode(layout: CellLayout, region: Region, index: int) -> list[tuple[int, ...]]:
    D = layout.cell_dimension
    total = D**region.n_cells
    if not 0 <= index < total:
        raise ValueError(f"basis index {index} out of range [0, {total})")
    cells = mixed_radix_decode(index, [D] * region.n_cells)
    return [layout.decode(c) for c in cells]
