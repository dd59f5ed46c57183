"""Matrix services: unitarity, Hermitian exponentials, embedded commutators.

All residuals are Frobenius norms.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .core import (
    DEFAULT_TOL,
    BoundaryLeakError,
    CellLayout,
    DefinitionError,
    QcaDefinition,
    ResourceError,
    digits_array,
    is_operator,
    strides_for,
)
from .operators import (
    DEFAULT_CONFIG_CAP,
    Action,
    ControlledRule,
    as_rule,
    block_dense,
    embed_dense,
    slot_dims,
)
from .state import SparseState

DEFAULT_COMMUTATOR_CAP = 2**24


def commutator_cap() -> int:
    value = os.environ.get("LUQCA_COMMUTATOR_CAP")
    return int(value) if value else DEFAULT_COMMUTATOR_CAP


def frobenius(M) -> float:
    if sp.issparse(M):
        return float(np.sqrt((np.abs(M.data) ** 2).sum())) if M.nnz else 0.0
    return float(np.linalg.norm(M))


def unitarity_residual(M) -> float:
    n = M.shape[0]
    if sp.issparse(M):
        M = sp.csr_matrix(M)
        return frobenius(M.conj().T @ M - sp.identity(n, format="csr"))
    M = np.asarray(M)
    return float(np.linalg.norm(M.conj().T @ M - np.eye(n)))


def is_unitary(M, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Return ``(passed, ||M^dagger M - I||_F)``."""
    if M.shape[0] != M.shape[1]:
        raise DefinitionError(f"matrix of shape {M.shape} is not square")
    res = unitarity_residual(M)
    return res <= tol, res


def is_hermitian(H, tol: float = DEFAULT_TOL) -> bool:
    H = np.asarray(H)
    scale = max(np.linalg.norm(H), 1.0)
    return np.linalg.norm(H - H.conj().T) <= tol * scale


def herm_exp(H, t: float) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``H`` via an eigendecomposition."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DefinitionError("herm_exp needs a square matrix")
    norm = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > 1e-9 * norm:
        raise DefinitionError("matrix is not Hermitian")
    if norm == 0.0:
        return np.eye(H.shape[0], dtype=np.complex128)
    w, v = np.linalg.eigh((H + H.conj().T) / 2)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


# -- embedding helpers ------------------------------------------------------

def embed_sparse(op, positions: Sequence[int], dims: Sequence[int]) -> sp.csr_matrix:
    """Embed ``op`` acting on factors ``positions`` into the product space ``dims``."""
    op = sp.coo_matrix(op)
    strides = strides_for(dims)
    sub_dims = [dims[p] for p in positions]
    rd = digits_array(op.row, sub_dims)
    cd = digits_array(op.col, sub_dims)
    r_idx = (rd * strides[list(positions)]).sum(axis=1)
    c_idx = (cd * strides[list(positions)]).sum(axis=1)
    rest = [i for i in range(len(dims)) if i not in positions]
    idle = np.zeros(1, dtype=np.int64)
    for i in rest:
        idle = (idle[:, None] + strides[i] * np.arange(dims[i])).ravel()
    rows = (r_idx[:, None] + idle[None, :]).ravel()
    cols = (c_idx[:, None] + idle[None, :]).ravel()
    vals = np.repeat(op.data, idle.size)
    N = math.prod(dims)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


# -- commutation --------------------------------------------------------------

@dataclass
class CommutationReport:
    """Commutator residual of the read operator with each overlapping translate."""

    offsets: list[tuple[int, ...]] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    tol: float = DEFAULT_TOL
    mode: str = "exhaustive"
    configs_checked: int = 0

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.residuals)

    @property
    def failing_offsets(self) -> list[tuple[int, ...]]:
        return [o for o, r in zip(self.offsets, self.residuals) if r > self.tol]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_residual": self.max_residual,
            "mode": self.mode,
            "offsets": [list(o) for o in self.offsets],
            "residuals": list(self.residuals),
        }


def _joint_cells(neighborhood, delta):
    a = list(neighborhood.offsets)
    b = [tuple(o + d for o, d in zip(off, delta)) for off in a]
    joint = sorted(set(a) | set(b))
    return joint, [joint.index(o) for o in a], [joint.index(o) for o in b]


def commutes_with_translations(qca: QcaDefinition, tol: float = DEFAULT_TOL,
                               config_cap: int = DEFAULT_CONFIG_CAP, samples: int = 512,
                               seed: int = 0, extra_configs: Sequence = ()) -> CommutationReport:
    """Check ``[U_0, U_delta] = 0`` for every nonzero delta in ``N - N``."""
    report = CommutationReport(tol=tol)
    N = qca.neighborhood
    L = qca.layout
    use_rule = isinstance(qca.read, ControlledRule) or L.has_classical
    rng = np.random.default_rng(seed)
    for delta in N.differences():
        joint, pa, pb = _joint_cells(N, delta)
        if use_rule:
            res, mode, count = _rule_commutator(qca.read_rule, L, len(joint), pa, pb,
                                                config_cap, samples, rng, extra_configs)
            report.mode = mode if report.mode == "exhaustive" else report.mode
            report.configs_checked += count
        else:
            res = _matrix_commutator(qca.read, L.cell_dimension, len(joint), pa, pb)
        report.offsets.append(delta)
        report.residuals.append(res)
    return report


def _matrix_commutator(U, D: int, n_joint: int, pa, pb) -> float:
    nnz = U.nnz if sp.issparse(U) else int(np.count_nonzero(U))
    idle = D ** (n_joint - len(pa))
    workload = 2 * nnz * idle
    cap = commutator_cap()
    if workload > cap:
        raise ResourceError(f"commutator workload {workload} exceeds cap {cap} "
                            f"(set LUQCA_COMMUTATOR_CAP to raise it)")
    dims = [D] * n_joint
    A = embed_sparse(U, pa, dims)
    B = embed_sparse(U, pb, dims)
    return frobenius(A @ B - B @ A)


def _rule_commutator(rule: ControlledRule, layout: CellLayout, n_joint: int, pa, pb,
                     config_cap: int, samples: int, rng, extra_configs) -> tuple[float, str, int]:
    nc = len(layout.classical_positions)
    cdims = layout.classical_dims * n_joint
    total = math.prod(cdims)
    if total <= config_cap:
        configs = itertools.product(*(range(d) for d in cdims))
        mode = "exhaustive"
    else:
        joint_rule = ControlledRule(layout, n_joint, lambda c: None)
        configs = joint_rule.random_configs(rng, samples)
        configs += [tuple(c) for c in extra_configs if len(c) == len(cdims)]
        mode = "sampled"
    qdim_cell = layout.quantum_dimension
    total_sq = 0.0
    count = 0

    def sub(cfg, cells):
        return tuple(v for c in cells for v in cfg[c * nc:(c + 1) * nc])

    for cfg in configs:
        count += 1
        cfg = list(cfg)
        ops1, cls1, slots1 = _compose(rule, cfg, pa, pb, nc, sub)
        ops2, cls2, slots2 = _compose(rule, cfg, pb, pa, nc, sub)
        slots = sorted(set(slots1) | set(slots2))
        touched_cells = {c for c, _ in slots}
        idle = qdim_cell ** (n_joint - len(touched_cells))
        for c in touched_cells:
            touched_regs = {r for cc, r in slots if cc == c}
            idle *= math.prod(layout.registers[r].dim for r in layout.quantum_positions
                              if r not in touched_regs)
        if cls1 != cls2:
            dim_q = math.prod(slot_dims(layout, slots)) * idle
            total_sq += 2.0 * dim_q
            continue
        M1 = _product(ops1, slots, layout)
        M2 = _product(ops2, slots, layout)
        total_sq += float(np.linalg.norm(M1 - M2) ** 2) * idle
    return math.sqrt(total_sq), mode, count


def _compose(rule, cfg, first, second, nc, sub):
    """Apply the rule at placement ``first`` then at ``second`` (classical-aware)."""
    ops = []
    slots = []
    cls = list(cfg)
    for cells in (first, second):
        act = rule.action(sub(cls, cells))
        if act.classical is not None:
            for k, c in enumerate(cells):
                cls[c * nc:(c + 1) * nc] = act.classical[k * nc:(k + 1) * nc]
        if act.block is not None:
            s = [(cells[k], r) for k, r in act.slots]
            ops.append((s, block_dense(act.block)))
            slots.extend(s)
    return ops, tuple(cls), slots


def _product(ops, slots, layout) -> np.ndarray:
    dims = slot_dims(layout, slots)
    K = math.prod(dims)
    M = np.eye(K, dtype=np.complex128)
    for s, block in ops:
        pos = [slots.index(x) for x in s]
        M = embed_dense(block, pos, dims) @ M
    return M


# -- local application ----------------------------------------------------------

def apply_local(state, op, support: Sequence[Sequence[int]], quiescent: int | None = None,
                backend=None):
    """Apply ``op`` on the cells ``support`` (in that order) of ``state``, in place.

    ``op`` is a matrix over the full basis of the support cells or a
    :class:`ControlledRule`.  Cells outside a quiescent-padded region are
    allowed only when ``quiescent`` is given and the operator keeps them
    quiescent; otherwise a :class:`BoundaryLeakError` is raised.
    """
    layout = state.layout
    n = len(support)
    if is_operator(op):
        expected = layout.cell_dimension**n
        if op.shape != (expected, expected):
            raise DefinitionError(f"operator shape {op.shape} does not match {n} cells")
    rule = as_rule(op, layout, n)
    positions = []
    for cell in support:
        if state.region.boundary == "torus" or state.region.contains(cell):
            positions.append(state.region.position(cell))
        elif quiescent is None:
            raise BoundaryLeakError(f"cell {tuple(cell)} lies outside the region")
        else:
            positions.append(None)
    if len(set(p for p in positions if p is not None)) != sum(p is not None for p in positions):
        raise DefinitionError("support visits a cell twice")
    qvals = layout.decode(quiescent) if quiescent is not None else None
    leak = apply_rule(state, rule, positions, qvals, backend=backend)
    if leak > 1e-12:
        raise BoundaryLeakError(f"operator moved weight {leak:.3e} out of the region")
    return state


def apply_rule(state, rule: ControlledRule, positions, quiescent_values, backend=None) -> float:
    """Apply ``rule`` at one placement; returns the squared norm lost at the boundary."""
    if isinstance(state, SparseState):
        return state.apply_action_groups(positions, rule, quiescent_values)
    nc = len(state.layout.classical_positions)
    cfg = []
    for p in positions:
        if p is None:
            cfg.extend(quiescent_values[i] for i in state.layout.classical_positions)
        else:
            cfg.extend(int(v) for v in state.classical[p])
    act = rule.action(tuple(cfg)) if nc else rule.action(())
    return state.apply_action(positions, act, quiescent_values, backend=backend)


def trace_distance(rho, sigma) -> float:
    w = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.abs(w).sum())
