from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import random_unitary, random_vector
from luqca.builders import ising_qca, walk_particle_state, walk_qca
from luqca.compiler import (
    CZ,
    DEFAULT_GATE_SET,
    HADAMARD,
    T_GATE,
    Circuit,
    Gate,
    circuit_input,
    circuit_region_output,
    compile_to_circuit,
    encode_circuit_as_qca,
    extract_output,
    layers_per_step,
    random_nn_circuit,
    route_nearest_neighbor,
    simulate_circuit,
    universal_qca,
)
from luqca.core import TORUS, DefinitionError, NeighborhoodScheme, QcaDefinition, Region
from luqca.core import CellLayout
from luqca.engine import run
from luqca.linalg import commutes_with_translations
from luqca.state import RegionState, random_state

GOLDEN = Path(__file__).parent / "golden"


def oracle_circuit(circuit: Circuit, vec):
    """Gate-by-gate dense application with the independent tensor contraction."""
    D = circuit.wire_dims[0]
    n = circuit.n_wires
    for layer in circuit.layers:
        for g in layer:
            vec = oracles.apply_on_axes(vec, g.matrix, list(g.wires), n, D)
    return vec


def unitary_of(circuit: Circuit):
    dim = math.prod(circuit.wire_dims)
    return np.column_stack([simulate_circuit(circuit, np.eye(dim)[:, k]) for k in range(dim)])


class TestCircuit:
    def test_simulation_matches_oracle(self, rng):
        layers = [[Gate(random_unitary(rng, 4), (2, 0)), Gate(random_unitary(rng, 2), (1,))],
                  [Gate(random_unitary(rng, 8), (3, 1, 2))],
                  [Gate(random_unitary(rng, 2), (3,))]]
        c = Circuit([2] * 4, layers)
        c.check()
        v = random_vector(rng, 16)
        assert np.allclose(simulate_circuit(c, v), oracle_circuit(c, v), atol=1e-13)

    def test_mixed_wire_dimensions(self, rng):
        g = Gate(random_unitary(rng, 6), (1, 0))
        c = Circuit([2, 3], [[g]])
        v = random_vector(rng, 6)
        # gate wires (1, 0): permute to (wire1, wire0) order, apply, permute back
        t = v.reshape(2, 3).T.reshape(-1)
        ref = (g.matrix @ t).reshape(3, 2).T.reshape(-1)
        assert np.allclose(simulate_circuit(c, v), ref)

    def test_check_rejects_overlap(self):
        c = Circuit([2, 2], [[Gate(np.eye(2), (0,)), Gate(np.eye(4), (0, 1))]])
        with pytest.raises(DefinitionError):
            c.check()

    def test_check_rejects_non_unitary(self):
        with pytest.raises(DefinitionError):
            Circuit([2], [[Gate(np.array([[1, 1], [0, 1]]), (0,))]]).check()

    def test_check_rejects_shape(self):
        with pytest.raises(DefinitionError):
            Circuit([3], [[Gate(np.eye(2), (0,))]]).check()

    def test_repeated_wire(self):
        with pytest.raises(DefinitionError):
            Gate(np.eye(4), (1, 1))

    def test_wrong_input_size(self):
        with pytest.raises(DefinitionError):
            simulate_circuit(Circuit([2, 2]), np.ones(3))

    def test_json_round_trip_bit_exact(self, rng):
        c = random_nn_circuit(rng, 3, 4)
        c.layers.append([Gate(random_unitary(rng, 2), (1,), "U")])
        again = Circuit.from_dict(json.loads(json.dumps(c.as_dict())))
        assert again.wire_dims == c.wire_dims
        for la, lb in zip(c.layers, again.layers):
            for ga, gb in zip(la, lb):
                assert ga.wires == gb.wires and ga.name == gb.name
                assert np.array_equal(ga.matrix, gb.matrix)

    def test_golden_circuit(self):
        c = Circuit.from_dict(json.loads((GOLDEN / "circuit_bell.json").read_text()))
        c.check()
        out = simulate_circuit(c, np.array([1, 0, 0, 0]))
        assert np.allclose(out, np.array([1, 0, 0, 1]) / math.sqrt(2), atol=1e-15)

    @pytest.mark.parametrize("doc", [{"format": "other", "version": 1},
                                     {"format": "luqca-circuit", "version": 99}])
    def test_bad_documents(self, doc):
        with pytest.raises(ValueError):
            Circuit.from_dict(doc)


class TestCompile:
    @pytest.mark.parametrize("n", [8, 16])
    @pytest.mark.parametrize("t", [1, 5])
    @pytest.mark.parametrize("boundary", ["torus", "quiescent"])
    def test_depth_linear(self, n, t, boundary):
        c = compile_to_circuit(ising_qca(), Region.line(n, boundary=boundary), t)
        assert layers_per_step(c) == 3
        assert c.depth == 3 * t
        c.check()

    def test_ising_layer_structure(self):
        c = compile_to_circuit(ising_qca(), Region.line(4, boundary=TORUS), 1)
        assert [sorted(g.wires for g in layer) for layer in c.layers] == [
            [(0, 1), (2, 3)], [(1, 2), (3, 0)], [(0,), (1,), (2,), (3,)]]

    def test_two_dimensional_layers(self):
        qca = QcaDefinition(CellLayout.single(2), NeighborhoodScheme.von_neumann(2),
                            np.eye(32), np.eye(2))
        c = compile_to_circuit(qca, Region.box((3, 3), boundary=TORUS), 2)
        assert c.depth == 2 * layers_per_step(c)
        c.check()

    @pytest.mark.parametrize("n", [4, 6])
    def test_torus_matches_engine(self, rng, n):
        qca = ising_qca(0.8, 0.3)
        region = Region.line(n, boundary=TORUS)
        s = random_state(region, qca.layout, rng)
        c = compile_to_circuit(qca, region, 4)
        out = simulate_circuit(c, s.amps)
        assert np.max(np.abs(out - run(s, qca, 4).amps)) < 1e-10

    def test_quiescent_with_ancillas_matches_engine(self):
        qca = walk_qca()
        region = Region.line(5)
        s = walk_particle_state(region, 2, "up", sparse=False)
        c = compile_to_circuit(qca, region, 2)
        assert len(c.metadata["ancilla_cells"]) == 2
        out = circuit_region_output(c, simulate_circuit(c, circuit_input(c, s.amps)))
        assert np.max(np.abs(out - run(s, qca, 2).amps)) < 1e-10

    def test_ancilla_leak_detected(self):
        qca = walk_qca()
        region = Region.line(3)
        s = walk_particle_state(region, 2, "up", sparse=False)
        c = compile_to_circuit(qca, region, 1)  # the particle now sits on the ancilla
        with pytest.raises(DefinitionError):
            circuit_region_output(c, simulate_circuit(c, circuit_input(c, s.amps)))

    def test_zero_steps(self):
        c = compile_to_circuit(ising_qca(), Region.line(4, boundary=TORUS), 0)
        assert c.depth == 0

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            compile_to_circuit(ising_qca(), Region.line(4, boundary=TORUS), -1)


class TestRouting:
    def test_preserves_unitary(self, rng):
        layers = [[Gate(random_unitary(rng, 4), (0, 3))],
                  [Gate(random_unitary(rng, 4), (2, 0)), Gate(random_unitary(rng, 2), (1,))],
                  [Gate(random_unitary(rng, 4), (1, 2))]]
        c = Circuit([2] * 4, layers)
        routed = route_nearest_neighbor(c)
        routed.check()
        assert np.allclose(unitary_of(routed), unitary_of(c), atol=1e-12)
        for layer in routed.layers:
            for g in layer:
                assert len(g.wires) == 1 or abs(g.wires[0] - g.wires[1]) == 1

    def test_custom_order(self, rng):
        c = Circuit([2] * 3, [[Gate(random_unitary(rng, 4), (0, 1))]])
        routed = route_nearest_neighbor(c, order=[0, 2, 1])
        pos = {0: 0, 2: 1, 1: 2}
        for layer in routed.layers:
            for g in layer:
                if len(g.wires) == 2:
                    assert abs(pos[g.wires[0]] - pos[g.wires[1]]) == 1
        assert np.allclose(unitary_of(routed), unitary_of(c), atol=1e-12)

    def test_compiled_torus_routed(self, rng):
        qca = ising_qca()
        region = Region.line(5, boundary=TORUS)
        c = compile_to_circuit(qca, region, 2)
        routed = route_nearest_neighbor(c)
        v = random_state(region, qca.layout, rng).amps
        assert np.allclose(simulate_circuit(routed, v), simulate_circuit(c, v), atol=1e-12)

    def test_bad_order(self):
        with pytest.raises(DefinitionError):
            route_nearest_neighbor(Circuit([2, 2]), order=[0, 0])

    def test_three_wire_gate_rejected(self):
        c = Circuit([2] * 3, [[Gate(np.eye(8), (0, 1, 2))]])
        with pytest.raises(DefinitionError):
            route_nearest_neighbor(c)


class TestUniversal:
    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        wires = int(rng.integers(1, 4))
        cols = int(rng.integers(1, 5))
        c = random_nn_circuit(rng, wires, cols)
        v = random_vector(rng, 2**wires)
        enc = encode_circuit_as_qca(c, input_state=v)
        out = extract_output(run(enc.initial, enc.qca, enc.steps), enc)
        ref = oracle_circuit(c, v) if wires > 0 else v
        assert abs(np.vdot(ref, out)) ** 2 > 1 - 1e-9

    def test_steps_linear_in_depth(self, rng):
        c = random_nn_circuit(rng, 2, 4)
        assert encode_circuit_as_qca(c).steps == 2 * c.depth

    def test_default_input_is_zero(self):
        c = Circuit([2, 2], [[Gate(HADAMARD, (0,), "H")], [Gate(CZ, (0, 1), "CZ")],
                             [Gate(HADAMARD, (1,), "H")]])
        enc = encode_circuit_as_qca(c)
        out = extract_output(run(enc.initial, enc.qca, enc.steps), enc)
        ref = oracle_circuit(c, np.array([1, 0, 0, 0], dtype=complex))
        assert abs(np.vdot(ref, out)) == pytest.approx(1.0, abs=1e-12)

    def test_custom_gate_set(self, rng):
        U = random_unitary(rng, 2)
        c = Circuit([2], [[Gate(U, (0,), "U")], [Gate(T_GATE, (0,), "T")]])
        enc = encode_circuit_as_qca(c, gate_set={"U": U, "T": T_GATE})
        v = random_vector(rng, 2)
        enc = encode_circuit_as_qca(c, gate_set={"U": U, "T": T_GATE}, input_state=v)
        out = extract_output(run(enc.initial, enc.qca, enc.steps), enc)
        assert abs(np.vdot(T_GATE @ U @ v, out)) ** 2 > 1 - 1e-12

    def test_non_neighbour_cz_rejected(self):
        c = Circuit([2] * 3, [[Gate(CZ, (0, 2), "CZ")]])
        with pytest.raises(DefinitionError):
            encode_circuit_as_qca(c)

    def test_unknown_gate_rejected(self, rng):
        c = Circuit([2], [[Gate(random_unitary(rng, 2), (0,))]])
        with pytest.raises(DefinitionError):
            encode_circuit_as_qca(c)

    def test_qudit_wires_rejected(self):
        with pytest.raises(DefinitionError):
            encode_circuit_as_qca(Circuit([3]))

    def test_commutation_sampled(self):
        rep = commutes_with_translations(universal_qca(), samples=64)
        assert rep.passed and rep.mode == "sampled"

    def test_gate_set_recorded(self):
        q = universal_qca()
        assert list(q.metadata["gate_set"]) == list(DEFAULT_GATE_SET)
