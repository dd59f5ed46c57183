"""Concrete automata: Ising and Heisenberg chains, the quantum-walk lattice
gas, spin-signal amplification and the shift-right automaton."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .coloring import Coloring, CqcaDefinition, cqca_period
from .core import (
    CellLayout,
    DefinitionError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
    ResourceError,
    amplitude_cap,
)
from .linalg import herm_exp
from .state import RegionState, SparseState

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SWAP2 = np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]]


def _swap_registers(dims: Sequence[int], a: int, b: int) -> np.ndarray:
    """Permutation matrix exchanging tensor factors ``a`` and ``b`` (equal dimensions)."""
    if dims[a] != dims[b]:
        raise DefinitionError("swapped registers must have equal dimension")
    n = int(np.prod(dims))
    idx = np.arange(n)
    digits = np.array(np.unravel_index(idx, dims))
    digits[[a, b]] = digits[[b, a]]
    target = np.ravel_multi_index(tuple(digits), dims)
    M = np.zeros((n, n), dtype=np.complex128)
    M[target, idx] = 1.0
    return M


# -- Ising ------------------------------------------------------------------------

def ising_qca(J: float = 1.0, dt: float = 0.1) -> QcaDefinition:
    """``U_0 = exp(-i J Z Z dt)`` on cells ``{0, +1}``, ``V = I``."""
    if dt <= 0:
        raise DefinitionError("time step must be positive")
    U = herm_exp(J * np.kron(PAULI_Z, PAULI_Z), dt)
    return QcaDefinition(CellLayout.single(2, "spin"), NeighborhoodScheme.interval(0, 1), U,
                         np.eye(2, dtype=np.complex128), quiescent=0, name="ising",
                         metadata={"J": J, "dt": dt})


def _two_site_chain(term: np.ndarray, n: int, periodic: bool) -> np.ndarray:
    H = np.zeros((2**n, 2**n), dtype=np.complex128)
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    for i, j in bonds:
        if j == i + 1:
            H += np.kron(np.kron(np.eye(2**i), term), np.eye(2 ** (n - i - 2)))
        else:
            # wrap bond: conjugate by a swap to bring (n-1, 0) next to each other
            P = _swap_registers([2] * n, 0, n - 2)
            H += P @ np.kron(np.eye(2 ** (n - 2)), term) @ P.T
    return H


def ising_hamiltonian(J: float, n: int, periodic: bool = True) -> np.ndarray:
    return _two_site_chain(J * np.kron(PAULI_Z, PAULI_Z), n, periodic)


# -- Heisenberg -------------------------------------------------------------------

def heisenberg_bond(J: float = 1.0) -> np.ndarray:
    """``J (XX + YY + ZZ - I)`` on two qubits."""
    return J * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)
                + np.kron(PAULI_Z, PAULI_Z) - np.eye(4))


def heisenberg_hamiltonian(J: float, n: int, periodic: bool = True) -> np.ndarray:
    return _two_site_chain(heisenberg_bond(J), n, periodic)


def heisenberg_cqca(J: float = 1.0, dt: float = 0.1, k: int = 1) -> CqcaDefinition:
    """Two-colour CQCA; phase ``c`` applies the bond factor on bonds starting at colour ``c``.

    One period is ``exp(-i H_b dt/k) exp(-i H_a dt/k)`` where ``H_a`` holds the
    bonds starting at even cells; ``k`` periods approximate ``exp(-i H dt)``.
    """
    if k < 1:
        raise DefinitionError("number of Trotter slices must be >= 1")
    factor = herm_exp(heisenberg_bond(J), dt / k)
    op = np.kron(np.eye(2), factor)  # cells (-1, 0, +1): act on (0, +1)
    layout = CellLayout.single(2, "spin")
    return CqcaDefinition(layout, Coloring.modular(2, 1), (op, op), (0, 1), name="heisenberg",
                          metadata={"J": J, "dt": dt, "k": k})


def trotter_error(J: float, dt: float, k: int, chain_length: int) -> float:
    """Spectral-norm distance between ``k`` CQCA periods and ``exp(-i H dt)`` on a closed chain."""
    if chain_length % 2 or chain_length < 4:
        raise DefinitionError("closed chain length must be even and >= 4")
    if 4 ** chain_length > amplitude_cap():
        raise ResourceError(f"chain of length {chain_length} exceeds the amplitude cap")
    cqca = heisenberg_cqca(J, dt, k)
    region = Region.line(chain_length, boundary="torus")
    dim = 2**chain_length
    M = np.empty((dim, dim), dtype=np.complex128)
    for col in range(dim):
        vec = np.zeros(dim, dtype=np.complex128)
        vec[col] = 1.0
        state = RegionState(region, cqca.layout, vec)
        M[:, col] = cqca_period(state, cqca, periods=k).amps
    exact = herm_exp(heisenberg_hamiltonian(J, chain_length, periodic=True), dt)
    return float(np.linalg.norm(M - exact, ord=2))


# -- quantum walk -------------------------------------------------------------------

@dataclass(frozen=True)
class WalkParams:
    p: complex
    q: complex
    phi: complex = 1.0

    def __post_init__(self):
        p, q, phi = complex(self.p), complex(self.q), complex(self.phi)
        if abs(abs(p) ** 2 + abs(q) ** 2 - 1) > 1e-12:
            raise DefinitionError("|p|^2 + |q|^2 must equal 1")
        if abs(p * q.conjugate() + p.conjugate() * q) > 1e-12:
            raise DefinitionError("p conj(q) + conj(p) q must vanish")
        if abs(abs(phi) - 1) > 1e-12:
            raise DefinitionError("|phi| must equal 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def balanced(cls) -> "WalkParams":
        return cls(1j / math.sqrt(2), 1 / math.sqrt(2), 1.0)

    @property
    def mass(self) -> complex:
        return 1j * self.p / self.q if self.q != 0 else complex("inf")

    def update_matrix(self) -> np.ndarray:
        """The single-cell operator in the (Up, Down) basis, before the register swap."""
        p, q, phi = self.p, self.q, self.phi
        return np.array([[1, 0, 0, 0], [0, q, p, 0], [0, p, q, 0], [0, 0, 0, phi]],
                        dtype=np.complex128)


WALK_LAYOUT = CellLayout([Register("up", 2), Register("down", 2)])


def walk_qca(params: WalkParams | None = None) -> QcaDefinition:
    """Quantum lattice gas on a line; quiescent state is the empty cell.

    ``U_0`` exchanges ``Up(x)`` with ``Down(x+1)``, so up particles hop right
    and down particles hop left; ``V`` mixes the two spins of a cell.
    """
    params = params or WalkParams.balanced()
    dims = [2, 2, 2, 2]  # up0, down0, up1, down1
    U = _swap_registers(dims, 0, 3)
    V = params.update_matrix() @ SWAP2
    return QcaDefinition(WALK_LAYOUT, NeighborhoodScheme.interval(0, 1), U, V, quiescent=0,
                         name="walk",
                         metadata={"p": [params.p.real, params.p.imag],
                                   "q": [params.q.real, params.q.imag],
                                   "phi": [params.phi.real, params.phi.imag]})


def walk_particle_state(region: Region, position: int, spin: str = "up",
                        amplitude: complex = 1.0, sparse: bool = True):
    """One particle at ``position`` with the given spin, every other cell empty."""
    digits = np.zeros((1, region.n_cells, 2), dtype=np.int64)
    digits[0, region.position((position,)), 0 if spin == "up" else 1] = 1
    state = SparseState(region, WALK_LAYOUT, digits, np.array([amplitude]))
    return state if sparse else state.to_dense()


def walk_amplitudes(state) -> list[tuple[int, complex, complex]]:
    """Single-particle amplitudes ``(x, Psi_u, Psi_d)`` for every cell of the region."""
    region = state.region
    if isinstance(state, RegionState):
        state = state.to_sparse()
    occupied = state.digits.sum(axis=(1, 2))
    table = {x[0]: [0j, 0j] for x in region.cells}
    for row, amp in zip(np.flatnonzero(occupied == 1), state.amps[occupied == 1]):
        p, reg = np.argwhere(state.digits[row] == 1)[0]
        table[region.cells[p][0]][reg] += amp
    return [(x, u, d) for x, (u, d) in sorted(table.items())]


def walk_recurrence(params: WalkParams, sites: Sequence[int], start: int, spin: str,
                    steps: int) -> list[list[tuple[int, complex, complex]]]:
    """Iterate the single-particle amplitude recurrences directly on a line of sites.

    ``Psi_u(x, t+1) = q Psi_u(x-1, t) + p Psi_d(x+1, t)`` and
    ``Psi_d(x, t+1) = q Psi_d(x+1, t) + p Psi_u(x-1, t)``; amplitudes outside
    ``sites`` are zero.  Returns the table ``(x, Psi_u, Psi_d)`` at every time.
    """
    sites = list(sites)
    n = len(sites)
    up = np.zeros(n + 2, dtype=np.complex128)
    down = np.zeros(n + 2, dtype=np.complex128)
    k = sites.index(start) + 1
    (up if spin == "up" else down)[k] = 1.0
    out = [[(x, up[i + 1], down[i + 1]) for i, x in enumerate(sites)]]
    for _ in range(steps):
        new_up = np.zeros_like(up)
        new_down = np.zeros_like(down)
        new_up[1:-1] = params.q * up[:-2] + params.p * down[2:]
        new_down[1:-1] = params.q * down[2:] + params.p * up[:-2]
        up, down = new_up, new_down
        out.append([(x, up[i + 1], down[i + 1]) for i, x in enumerate(sites)])
    return out


# -- amplification ------------------------------------------------------------------

SPIN_VALUES = np.array([0, 1, -1])  # cell index -> spin value (0 is quiescent)
AMPLIFICATION_LAYOUT = CellLayout.single(3, "spin")


@dataclass(frozen=True)
class AmplificationSpec:
    s: int = 2
    flip_set: frozenset = frozenset({-2, -1, 0})
    psi: tuple[complex, complex] = (1 / math.sqrt(2), 1 / math.sqrt(2))

    def __post_init__(self):
        if self.s < 2:
            raise DefinitionError("cube side must be >= 2")
        flips = frozenset(int(v) for v in self.flip_set)
        if any(not -6 <= v <= 6 for v in flips):
            raise DefinitionError("flip sums must lie in [-6, 6]")
        object.__setattr__(self, "flip_set", flips)
        a, b = (complex(v) for v in self.psi)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
            raise DefinitionError("corner state must be normalised")
        object.__setattr__(self, "psi", (a, b))

    @property
    def flip_mask(self) -> np.ndarray:
        mask = np.zeros(13, dtype=np.uint8)
        for v in self.flip_set:
            mask[v + 6] = 1
        return mask

    @property
    def region(self) -> Region:
        return Region.box((self.s,) * 3)


def amplification_operator(flip_set) -> sp.csr_matrix:
    """Permutation on the 3D radius-1 neighbourhood: flip the centre spin on allowed sums."""
    nb = NeighborhoodScheme.von_neumann(3)
    n = nb.size
    centre = nb.center
    idx = np.arange(3**n)
    digits = np.array(np.unravel_index(idx, (3,) * n))
    values = SPIN_VALUES[digits]
    sums = values.sum(axis=0) - values[centre]
    flip = np.isin(sums, list(flip_set)) & (digits[centre] != 0)
    new = digits.copy()
    new[centre, flip] = 3 - digits[centre, flip]  # 1 <-> 2
    target = np.ravel_multi_index(tuple(new), (3,) * n)
    return sp.csr_matrix((np.ones(idx.size, dtype=np.complex128), (target, idx)),
                         shape=(3**n, 3**n))


def amplification_cqca(spec: AmplificationSpec | None = None) -> CqcaDefinition:
    """Two-colour 3D CQCA: black phase then white phase, same flip operator."""
    spec = spec or AmplificationSpec()
    op = amplification_operator(spec.flip_set)
    return CqcaDefinition(AMPLIFICATION_LAYOUT, Coloring.checkerboard(3), (op, op), (0, 1),
                          name="amplification", metadata={"flip_set": sorted(spec.flip_set)})


def amplification_cells(spec: AmplificationSpec, corner: int) -> list[int]:
    """Cell indices of the cube configuration with the corner set to ``corner``."""
    cells = [2] * spec.s**3
    cells[0] = corner
    return cells


def amplification_state(spec: AmplificationSpec) -> SparseState:
    """``alpha |+1 corner> + beta |-1 corner>`` on the cube, as a sparse state."""
    region = spec.region
    a, b = spec.psi
    digits = np.array([amplification_cells(spec, 1), amplification_cells(spec, 2)])
    return SparseState(region, AMPLIFICATION_LAYOUT, digits[:, :, None], np.array([a, b]))


@dataclass
class OrbitResult:
    reached_fixed_point: bool
    steps: int
    final: np.ndarray
    flips: list[int] = field(default_factory=list)
    cycle_length: int = 0


def classical_orbit(grid: np.ndarray, flip_mask: np.ndarray, max_periods: int | None = None,
                    backend=None) -> OrbitResult:
    """Iterate black/white phases on a spin grid (values -1, 0, +1) until it repeats.

    ``steps`` counts periods until the fixed point (or the start of the
    cycle) is first reached.
    """
    s = grid.shape
    padded = np.zeros(tuple(n + 2 for n in s), dtype=np.int8)
    padded[1:-1, 1:-1, 1:-1] = grid
    max_periods = max_periods or 3**min(int(np.prod(s)), 12) + 10
    seen = {padded.tobytes(): 0}
    flips: list[int] = []
    for period in range(1, max_periods + 1):
        count = 0
        for parity in (0, 1):
            c = _kernels.flip_phase(padded, parity, flip_mask, backend=backend)
            flips.append(c)
            count += c
        key = padded.tobytes()
        if count == 0:
            return OrbitResult(True, period - 1, padded[1:-1, 1:-1, 1:-1].copy(), flips[:-2])
        if key in seen:
            start = seen[key]
            return OrbitResult(False, start, padded[1:-1, 1:-1, 1:-1].copy(), flips,
                               period - start)
        seen[key] = period
    return OrbitResult(False, max_periods, padded[1:-1, 1:-1, 1:-1].copy(), flips)


def evolve_grid(grid: np.ndarray, flip_mask: np.ndarray, periods: int, backend=None) -> np.ndarray:
    """Spin grid after exactly ``periods`` black/white periods (no cycle detection)."""
    padded = np.zeros(tuple(n + 2 for n in grid.shape), dtype=np.int8)
    padded[1:-1, 1:-1, 1:-1] = grid
    for _ in range(periods):
        for parity in (0, 1):
            _kernels.flip_phase(padded, parity, flip_mask, backend=backend)
    return padded[1:-1, 1:-1, 1:-1].copy()


def grid_to_cells(grid: np.ndarray) -> list[int]:
    """Spin grid (values -1, 0, +1) to cell basis indices in lexicographic order."""
    lookup = {0: 0, 1: 1, -1: 2}
    return [lookup[int(v)] for v in grid.reshape(-1)]


@dataclass
class AmplificationReport:
    reached_fixed_point: bool
    steps: int
    amplified: bool
    fidelity: float
    plus_orbit: OrbitResult
    minus_orbit: OrbitResult

    def as_dict(self) -> dict:
        return {"reached_fixed_point": self.reached_fixed_point, "steps": self.steps,
                "amplified": self.amplified, "fidelity": self.fidelity,
                "flips_per_phase": self.plus_orbit.flips,
                "minus_fixed": self.minus_orbit.reached_fixed_point
                and self.minus_orbit.steps == 0}


def amplification_demo(spec: AmplificationSpec | None = None, backend=None) -> AmplificationReport:
    """Classical orbits of the two corner configurations, combined by linearity."""
    spec = spec or AmplificationSpec()
    s = spec.s
    mask = spec.flip_mask
    plus = -np.ones((s, s, s), dtype=np.int8)
    plus[0, 0, 0] = 1
    minus = -np.ones((s, s, s), dtype=np.int8)
    po = classical_orbit(plus, mask, backend=backend)
    mo = classical_orbit(minus, mask, backend=backend)
    all_plus = np.ones_like(plus)
    a, b = spec.psi
    X, B = po.final, mo.final
    overlap = (abs(a) ** 2 * np.array_equal(X, all_plus)
               + a.conjugate() * b * np.array_equal(B, all_plus)
               + b.conjugate() * a * np.array_equal(X, minus)
               + abs(b) ** 2 * np.array_equal(B, minus))
    amplified = po.reached_fixed_point and np.array_equal(X, all_plus)
    return AmplificationReport(po.reached_fixed_point, po.steps, bool(amplified),
                               float(abs(overlap) ** 2), po, mo)


# -- shift right --------------------------------------------------------------------

def shift_right_qca(data_dim: int = 2) -> QcaDefinition:
    """Registers (data, buffer); ``U`` moves data into the right neighbour's buffer, ``V`` commits."""
    layout = CellLayout([Register("data", data_dim), Register("buffer", data_dim)])
    dims = [data_dim] * 4  # data0, buffer0, data1, buffer1
    U = _swap_registers(dims, 0, 3)
    V = _swap_registers([data_dim] * 2, 0, 1)
    return QcaDefinition(layout, NeighborhoodScheme.interval(0, 1), U, V, quiescent=0,
                         name="shift-right", metadata={"data_dim": data_dim})


def global_phase(a: np.ndarray, b: np.ndarray) -> complex:
    """Phase ``z`` minimising ``||a - z b||`` (for comparisons up to global phase)."""
    inner = np.vdot(b, a)
    return inner / abs(inner) if abs(inner) > 0 else 1.0


__all__ = [
    "AmplificationReport", "AmplificationSpec", "WalkParams", "amplification_cqca",
    "amplification_demo", "amplification_state", "classical_orbit", "evolve_grid",
    "grid_to_cells", "heisenberg_cqca",
    "heisenberg_hamiltonian", "ising_hamiltonian", "ising_qca", "shift_right_qca",
    "trotter_error", "walk_amplitudes", "walk_particle_state", "walk_qca", "walk_recurrence",
]
