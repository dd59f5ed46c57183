"""Step execution, lightcone sizing and observables.

A step applies the read operator at every placement ``x`` whose
neighbourhood meets the region, then the update operator on every cell.
In quiescent mode cells outside the region are never stored: operators
that reach outside are restricted to the subspace where those cells are
quiescent, and any weight lost that way is reported as leakage.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .core import (
    QUIESCENT,
    TORUS,
    BoundaryLeakError,
    DefinitionError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
)
from .linalg import apply_rule, is_hermitian
from .operators import ControlledRule
from .state import RegionState, SparseState, unique_rows

DEFAULT_LEAK_TOL = 1e-9


@lru_cache(maxsize=128)
def placements(region: Region, neighborhood: NeighborhoodScheme):
    """Read-operator placements for a region, lexicographic in ``x``.

    Each entry is ``(x, positions)``; ``positions[k]`` is the region
    position of cell ``x + offsets[k]`` or ``None`` outside a quiescent
    region.
    """
    out = []
    if region.boundary == TORUS:
        region.check_torus(neighborhood)
        for x in region.cells:
            cells = [tuple(a + b for a, b in zip(x, o)) for o in neighborhood.offsets]
            out.append((x, tuple(region.position(c) for c in cells)))
        return tuple(out)
    lo = [l - u for l, u in zip(region.lower, neighborhood.upper)]
    hi = [h - l for h, l in zip(region.upper, neighborhood.lower)]
    for x in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        positions = []
        for o in neighborhood.offsets:
            c = tuple(a + b for a, b in zip(x, o))
            positions.append(region.position(c) if region.contains(c) else None)
        if any(p is not None for p in positions):
            out.append((x, tuple(positions)))
    return tuple(out)


def _quiescent_values(qca_quiescent, layout, placements_list):
    if any(None in pos for _, pos in placements_list):
        if qca_quiescent is None:
            raise DefinitionError("quiescent boundary needs a quiescent state; "
                                  "use a torus region instead")
        return layout.decode(qca_quiescent)
    return None


def apply_placements(state, rule: ControlledRule, placements_list, quiescent: int | None,
                     leak_tol: float = DEFAULT_LEAK_TOL, backend=None) -> float:
    """Apply ``rule`` at each placement in the given order; returns the total leakage."""
    qvals = _quiescent_values(quiescent, state.layout, placements_list)
    leak = 0.0
    for _, positions in placements_list:
        leak += apply_rule(state, rule, positions, qvals, backend=backend)
    if leak > leak_tol:
        raise BoundaryLeakError(
            f"weight {leak:.3e} left the region; enlarge it (see required_region)")
    return leak


def step(state, qca: QcaDefinition, order: Sequence[int] | None = None,
         leak_tol: float = DEFAULT_LEAK_TOL, backend=None, inplace: bool = False):
    """One global step ``R = V U``; returns the new state.

    ``order`` optionally permutes the read placements (for order-independence
    checks).  The result does not depend on it for a valid definition.
    """
    if not inplace:
        state = state.copy()
    if state.layout != qca.layout:
        raise DefinitionError("state and definition use different cell layouts")
    if state.region.dimension != qca.dimension:
        raise DefinitionError("state and definition have different lattice dimensions")
    plist = placements(state.region, qca.neighborhood)
    if order is not None:
        plist = tuple(plist[i] for i in order)
    apply_placements(state, qca.read_rule, plist, qca.quiescent, leak_tol, backend)
    cell_places = tuple((c, (p,)) for p, c in enumerate(state.region.cells))
    apply_placements(state, qca.update_rule, cell_places, qca.quiescent, leak_tol, backend)
    state.t += 1
    return state


def run(state, qca: QcaDefinition, t: int, observer: Callable | None = None,
        leak_tol: float = DEFAULT_LEAK_TOL, backend=None):
    """``t`` steps; ``observer(state)`` is called on the initial state and after each step."""
    if t < 0:
        raise ValueError("number of steps must be non-negative")
    state = state.copy()
    if observer is not None:
        observer(state)
    for _ in range(t):
        step(state, qca, leak_tol=leak_tol, backend=backend, inplace=True)
        if observer is not None:
            observer(state)
    return state


# -- lightcone ----------------------------------------------------------------

@dataclass(frozen=True)
class LightconeSpec:
    target: Region
    steps: int
    radius_left: tuple[int, ...]
    radius_right: tuple[int, ...]
    padded: Region

    @property
    def padding(self) -> tuple[tuple[int, int], ...]:
        return tuple((a * self.steps, b * self.steps)
                     for a, b in zip(self.radius_left, self.radius_right))


def required_region(target: Region, qca: QcaDefinition, t: int) -> LightconeSpec:
    """Smallest box whose initial data fixes the reduced state on ``target`` after ``t`` steps.

    One read phase can move information by any vector in ``N - N`` (an
    operator placed at ``x`` writes all of ``x + N``), so each side of each
    axis grows by ``max(N) - min(N)`` per step.
    """
    if t < 0:
        raise ValueError("number of steps must be non-negative")
    reach = qca.neighborhood.reach
    padded = target.expanded([r * t for r in reach], [r * t for r in reach])
    return LightconeSpec(target, t, reach, reach, padded)


# -- observables ----------------------------------------------------------------

def reduced_density(state, cells: Sequence[Sequence[int]]) -> np.ndarray:
    """Reduced density matrix on ``cells`` over their full basis (classical included)."""
    region = state.region
    positions = [region.position(c) for c in cells]
    if len(set(positions)) != len(positions):
        raise ValueError("cells must be distinct")
    L = state.layout
    D = L.cell_dimension
    if isinstance(state, SparseState):
        return _sparse_reduced(state, positions)
    nq = state.nq
    tensor = state.amps.reshape(state.tensor_dims) if state.tensor_dims else state.amps
    axes = [p * nq + j for p in positions for j in range(nq)]
    rest = [a for a in range(len(state.tensor_dims)) if a not in axes]
    Qs = L.quantum_dimension ** len(positions)
    mat = np.transpose(tensor, axes + rest).reshape(Qs, -1)
    rho_q = mat @ mat.conj().T
    if not L.has_classical:
        return rho_q
    # embed the quantum block at the definite classical values
    idx = np.empty(Qs, dtype=np.int64)
    Q = L.quantum_dimension
    for qi in range(Qs):
        full = 0
        rem = qi
        parts = []
        for _ in positions:
            rem, d = divmod(rem, Q)
            parts.append(d)
        for p, qcell in zip(positions, reversed(parts)):
            full = full * D + L.join(tuple(state.classical[p]), qcell)
        idx[qi] = full
    rho = np.zeros((D ** len(positions),) * 2, dtype=np.complex128)
    rho[np.ix_(idx, idx)] = rho_q
    return rho


def _sparse_reduced(state: SparseState, positions) -> np.ndarray:
    D = state.layout.cell_dimension
    cells = state.cell_indices()
    sub = np.zeros(cells.shape[0], dtype=np.int64)
    for p in positions:
        sub = sub * D + cells[:, p]
    others = [p for p in range(cells.shape[1]) if p not in positions]
    rest = cells[:, others]
    dim = D ** len(positions)
    _, group = unique_rows(rest)
    # one row per environment configuration; rho sums their outer products
    vecs = np.zeros((int(group.max()) + 1 if group.size else 0, dim), dtype=np.complex128)
    np.add.at(vecs, (group, sub), state.amps)
    return vecs.T @ vecs.conj()


def observe(state, cell: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of one cell."""
    if not state.region.contains(cell) and state.region.boundary != TORUS:
        raise ValueError(f"cell {tuple(cell)} is outside the region")
    return reduced_density(state, [cell])


def expectation(state, cell: Sequence[int], observable) -> float:
    observable = np.asarray(observable, dtype=np.complex128)
    if not is_hermitian(observable, 1e-10):
        raise ValueError("observable is not Hermitian")
    rho = observe(state, cell)
    if observable.shape != rho.shape:
        raise ValueError(f"observable shape {observable.shape} does not match cell {rho.shape}")
    return float(np.trace(rho @ observable).real)


def register_observable(layout, register: str, matrix) -> np.ndarray:
    """Lift an operator on one register to the full cell basis."""
    from .operators import embed_dense

    pos = layout.index_of(register)
    return embed_dense(np.asarray(matrix, dtype=np.complex128), [pos], layout.dims)


def population_observable(layout, register: str, value: int) -> np.ndarray:
    dim = layout.registers[layout.index_of(register)].dim
    proj = np.zeros((dim, dim))
    proj[value, value] = 1.0
    return register_observable(layout, register, proj)


def sz_observable(layout, register: str | None = None) -> np.ndarray:
    """``|0><0| - |1><1|`` on a qubit register (the first one by default)."""
    register = register or layout.registers[0].name
    return register_observable(layout, register, np.diag([1.0, -1.0]))


def translate_state(state: RegionState, shift: Sequence[int]) -> RegionState:
    """Cyclic lattice translation of a torus state by ``shift``."""
    region = state.region
    if region.boundary != TORUS:
        raise ValueError("translation is only defined on a torus")
    perm = [region.position(tuple(c - s for c, s in zip(cell, shift))) for cell in region.cells]
    nq = state.nq
    tensor = state.amps.reshape(state.tensor_dims)
    axes = [perm[p] * nq + j for p in range(region.n_cells) for j in range(nq)]
    amps = np.transpose(tensor, axes).reshape(-1).copy() if axes else state.amps.copy()
    classical = state.classical[perm].copy()
    return RegionState(region, state.layout, amps, classical, state.t)


__all__ = [
    "QUIESCENT", "TORUS", "LightconeSpec", "apply_placements", "expectation", "observe",
    "placements", "reduced_density", "required_region", "run", "step", "translate_state",
]
