from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from luqca.builders import (
    AmplificationSpec,
    WalkParams,
    amplification_cqca,
    amplification_demo,
    amplification_state,
    classical_orbit,
    evolve_grid,
    grid_to_cells,
    heisenberg_hamiltonian,
    ising_hamiltonian,
    ising_qca,
    shift_right_qca,
    trotter_error,
    walk_amplitudes,
    walk_particle_state,
    walk_qca,
    walk_recurrence,
)
from luqca.builders import amplification_operator
from luqca.coloring import cqca_period
from luqca.core import TORUS, DefinitionError, Region
from luqca.demos import amplification_check
from luqca.engine import run
from luqca.state import RegionState, SparseState
from luqca.validation import validate_definition

GOLDEN = Path(__file__).parent / "golden"
PAULI_Z = np.diag([1.0, -1.0])


def golden(s):
    return json.loads((GOLDEN / f"amplification_s{s}.json").read_text())


def corner_grid(s, corner=1):
    g = -np.ones((s, s, s), dtype=np.int8)
    g[0, 0, 0] = corner
    return g


class TestIsing:
    def test_hamiltonian_matches_oracle(self):
        ref = oracles.chain_hamiltonian(np.kron(PAULI_Z, PAULI_Z), 4)
        assert np.allclose(ising_hamiltonian(1.0, 4), ref)

    def test_open_chain_has_fewer_bonds(self):
        ref = oracles.chain_hamiltonian(np.kron(PAULI_Z, PAULI_Z), 4, periodic=False)
        assert np.allclose(ising_hamiltonian(1.0, 4, periodic=False), ref)

    def test_validates(self):
        assert validate_definition(ising_qca()).max_residual < 1e-10


class TestHeisenberg:
    def test_hamiltonian_hermitian(self):
        Hm = heisenberg_hamiltonian(1.0, 4)
        assert np.allclose(Hm, Hm.conj().T)

    def test_error_decreases(self):
        errs = [trotter_error(1.0, 0.2, k, 4) for k in (1, 2, 4, 8, 16)]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    @pytest.mark.parametrize("k", [4, 8])
    def test_first_order_ratio(self, k):
        ratio = trotter_error(1.0, 0.2, k, 4) / trotter_error(1.0, 0.2, 2 * k, 4)
        assert 1.6 <= ratio <= 2.4

    def test_single_slice_error_matches_dense(self):
        X = np.array([[0, 1], [1, 0]])
        Y = np.array([[0, -1j], [1j, 0]])
        bond = np.kron(X, X) + np.kron(Y, Y) + np.kron(PAULI_Z, PAULI_Z) - np.eye(4)
        n, dt = 4, 0.2
        Ha = np.zeros((16, 16), dtype=complex)
        Hb = np.zeros((16, 16), dtype=complex)
        for i in range(n):
            term = oracles._two_site(bond, i, (i + 1) % n, n)
            (Ha if i % 2 == 0 else Hb)[...] += term
        approx = oracles.dense_exp(Hb, dt) @ oracles.dense_exp(Ha, dt)
        exact = oracles.dense_exp(Ha + Hb, dt)
        assert trotter_error(1.0, dt, 1, n) == pytest.approx(np.linalg.norm(approx - exact, 2),
                                                             abs=1e-12)

    def test_rejects_odd_chain(self):
        with pytest.raises(DefinitionError):
            trotter_error(1.0, 0.1, 1, 5)


class TestWalk:
    @pytest.mark.parametrize("theta", [math.pi / 4, 0.3, 1.2])
    @pytest.mark.parametrize("spin", ["up", "down"])
    def test_engine_matches_recurrence(self, theta, spin):
        params = WalkParams(1j * math.sin(theta), math.cos(theta))
        n, start, steps = 20, 10, 8
        qca = walk_qca(params)
        state = walk_particle_state(Region.line(n), start, spin)
        ref = walk_recurrence(params, range(n), start, spin, steps)
        for t in range(steps + 1):
            table = walk_amplitudes(state)
            for (x, u, d), (_, ru, rd) in zip(table, ref[t]):
                assert abs(u - ru) < 1e-12 and abs(d - rd) < 1e-12
            state = run(state, qca, 1)

    def test_recurrence_matches_oracle(self):
        p, q = 1j / math.sqrt(2), 1 / math.sqrt(2)
        ours = walk_recurrence(WalkParams(p, q), range(30), 15, "up", 12)
        ref = oracles.walk_recurrence_table(p, q, 30, 15, 12)
        for t in range(13):
            assert np.allclose([u for _, u, _ in ours[t]], ref[t][0], atol=1e-15)
            assert np.allclose([d for _, _, d in ours[t]], ref[t][1], atol=1e-15)

    def test_probability_conserved(self):
        state = walk_particle_state(Region.line(24), 12, "down")
        out = run(state, walk_qca(), 10)
        probs = [abs(u) ** 2 + abs(d) ** 2 for _, u, d in walk_amplitudes(out)]
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_up_particle_moves_right_at_q_one(self):
        params = WalkParams(0.0, 1.0)
        state = walk_particle_state(Region.line(8), 2, "up")
        out = run(state, walk_qca(params), 3)
        table = walk_amplitudes(out)
        assert abs(table[5][1]) == pytest.approx(1.0)

    def test_dense_and_sparse_agree(self):
        region = Region.line(6)
        sp = run(walk_particle_state(region, 3, "up"), walk_qca(), 2)
        dense = run(walk_particle_state(region, 3, "up", sparse=False), walk_qca(), 2)
        assert isinstance(dense, RegionState)
        assert np.allclose(sp.full_vector(), dense.amps, atol=1e-14)

    def test_validates(self):
        assert validate_definition(walk_qca()).max_residual < 1e-10

    @pytest.mark.parametrize("p,q", [(0.5, 0.5), (1.0, 1.0), (1 / math.sqrt(2), 1 / math.sqrt(2))])
    def test_bad_parameters(self, p, q):
        with pytest.raises(DefinitionError):
            WalkParams(p, q)

    def test_mass(self):
        assert WalkParams.balanced().mass == pytest.approx(-1.0)


class TestAmplification:
    def test_operator_is_permutation(self):
        op = amplification_operator({-2, -1, 0}).tocsr()
        assert op.nnz == op.shape[0]
        assert np.all(op.data == 1)
        assert np.unique(op.indices).size == op.shape[0]
        assert np.all(np.diff(op.indptr) == 1)

    @given(st.sets(st.integers(-6, 6), max_size=6))
    def test_any_flip_set_gives_involution(self, flips):
        # the centre does not enter its own neighbour sum, so flipping twice undoes it
        sq = (amplification_operator(flips) @ amplification_operator(flips)).tocsr()
        sq.eliminate_zeros()
        assert sq.nnz == sq.shape[0]
        assert np.array_equal(sq.indices, np.arange(sq.shape[0]))

    @pytest.mark.parametrize("s", [2, 3])
    def test_golden_orbit(self, s):
        g = golden(s)
        mask = AmplificationSpec(s, frozenset(g["flip_set"])).flip_mask
        grid = corner_grid(s)
        for p, expected in enumerate(g["grids"]):
            assert evolve_grid(grid, mask, p).reshape(-1).tolist() == expected
        orbit = classical_orbit(grid, mask)
        i, j = g["first_repeat"]
        assert orbit.reached_fixed_point == g["fixed_point"]
        assert orbit.steps == i
        assert orbit.cycle_length == j - i
        assert orbit.flips == g["flips"]

    @pytest.mark.parametrize("s", [2, 3])
    def test_golden_orbit_on_quantum_engine(self, s):
        g = golden(s)
        spec = AmplificationSpec(s, frozenset(g["flip_set"]))
        cq = amplification_cqca(spec)
        state = SparseState.basis(spec.region, cq.layout, grid_to_cells(corner_grid(s)))
        for expected in g["grids"][1:]:
            state = cqca_period(state, cq, 1, quiescent=0)
            assert state.amps.size == 1 and state.amps[0] == 1
            assert state.digits[0, :, 0].tolist() == grid_to_cells(np.array(expected))

    @pytest.mark.parametrize("s", [2, 3])
    def test_minus_fixed_point(self, s):
        spec = AmplificationSpec(s)
        cq = amplification_cqca(spec)
        minus = SparseState.basis(spec.region, cq.layout, [2] * s**3)
        out = cqca_period(minus, cq, 3, quiescent=0)
        assert np.array_equal(out.digits, minus.digits) and out.amps[0] == 1

    @pytest.mark.parametrize("s", [2, 3])
    def test_linearity(self, s):
        spec = AmplificationSpec(s, psi=(0.6, 0.8j))
        check = amplification_check(spec, periods=3)
        assert check["permutation"] and check["minus_fixed_point"] and check["linearity"]

    def test_superposed_state(self):
        spec = AmplificationSpec(2, psi=(0.6, 0.8))
        st0 = amplification_state(spec)
        assert st0.amps.tolist() == [0.6, 0.8]
        assert st0.digits[0, 0, 0] == 1 and st0.digits[1, 0, 0] == 2

    @pytest.mark.parametrize("s", [2, 3])
    def test_report_matches_golden(self, s):
        rep = amplification_demo(AmplificationSpec(s))
        g = golden(s)
        assert rep.reached_fixed_point == g["fixed_point"]
        assert rep.amplified is False
        assert rep.fidelity == pytest.approx(0.25)
        assert rep.as_dict()["minus_fixed"]

    def test_cqca_uses_checkerboard(self):
        cq = amplification_cqca()
        assert cq.coloring.k == 2 and cq.colors == (0, 1)

    @pytest.mark.parametrize("kwargs", [{"s": 1}, {"flip_set": frozenset({7})},
                                        {"psi": (1.0, 1.0)}])
    def test_bad_spec(self, kwargs):
        with pytest.raises(DefinitionError):
            AmplificationSpec(**kwargs)


class TestShiftRight:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_basis_data_moves_right(self, dim):
        qca = shift_right_qca(dim)
        n = 5
        region = Region.line(n, boundary=TORUS)
        data = [(k * 7 + 1) % dim for k in range(n)]
        cells = [qca.layout.encode((v, 0)) for v in data]
        s = SparseState.basis(region, qca.layout, cells)
        for t in range(1, 4):
            s = run(s, qca, 1)
            got = s.digits[0, :, 0].tolist()
            assert got == [data[(x - t) % n] for x in range(n)]
            assert s.digits[0, :, 1].tolist() == [0] * n

    def test_validates(self):
        assert validate_definition(shift_right_qca()).passed

    def test_quiescent_region_moves_particle(self):
        qca = shift_right_qca()
        s = SparseState.basis(Region.line(4), qca.layout, [qca.layout.encode((1, 0)), 0, 0, 0])
        out = run(s, qca, 2)
        assert out.digits[0, :, 0].tolist() == [0, 0, 1, 0]
