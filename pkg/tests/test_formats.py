from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_unitary
from luqca.builders import heisenberg_cqca, ising_qca, walk_particle_state, walk_qca
from luqca.coloring import CqcaDefinition
from luqca.compiler import universal_qca
from luqca.core import TORUS, CellLayout, QcaDefinition, Region, Register
from luqca.formats import (
    BUILDERS,
    CSV_HEADER,
    ModelFormatError,
    builder_document,
    cell_label,
    cnot_read_fixture,
    layout_from_json,
    layout_to_json,
    matrix_from_json,
    matrix_to_json,
    model_from_json,
    model_to_json,
    parse_region,
    read_model,
    read_state,
    read_table,
    region_from_json,
    region_to_json,
    snapshot_entries,
    state_from_json,
    state_to_json,
    universal_document,
    write_json,
    write_state,
    write_table,
)
from luqca.state import RegionState, SparseState, random_state
from luqca.translators import MargolusDef, WatrousPartitionedDef


def through_text(doc):
    return json.loads(json.dumps(doc))


class TestMatrices:
    def test_dense_bit_exact(self, rng):
        M = random_unitary(rng, 5)
        assert np.array_equal(matrix_from_json(through_text(matrix_to_json(M))), M)

    def test_sparse_bit_exact(self, rng):
        M = sp.random(6, 6, density=0.3, random_state=1) * (1 + 0.5j)
        back = matrix_from_json(through_text(matrix_to_json(M)))
        assert sp.issparse(back)
        assert np.array_equal(back.toarray(), M.toarray())

    def test_shape_mismatch(self):
        with pytest.raises(ModelFormatError):
            matrix_from_json({"shape": [2, 2], "dense": [[[1, 0]]]})

    def test_missing_key(self):
        with pytest.raises(ModelFormatError):
            matrix_from_json({"dense": []})


class TestLayoutRegion:
    def test_layout_round_trip(self):
        L = CellLayout([Register("a", 2), Register("b", 3, True)])
        assert layout_from_json(through_text(layout_to_json(L))) == L

    @pytest.mark.parametrize("region", [Region.line(5), Region.box((2, 3), boundary=TORUS),
                                        Region((-2,), (4,))])
    def test_region_round_trip(self, region):
        assert region_from_json(through_text(region_to_json(region))) == region

    @pytest.mark.parametrize("text,lower,upper", [("8", (0,), (7,)), ("4x3", (0, 0), (3, 2)),
                                                  ("-3:5", (-3,), (5,))])
    def test_parse_region(self, text, lower, upper):
        r = parse_region(text, "quiescent")
        assert r.lower == lower and r.upper == upper

    def test_parse_region_bad(self):
        with pytest.raises(ModelFormatError):
            parse_region("abc", "torus")

    def test_cell_label(self):
        assert cell_label((3,)) == "site_3"
        assert cell_label((1, -2)) == "site_1_-2"


def same_qca(a: QcaDefinition, b: QcaDefinition):
    assert a.layout == b.layout
    assert a.neighborhood == b.neighborhood
    assert a.quiescent == b.quiescent
    assert np.array_equal(a.read_matrix(), b.read_matrix())
    assert np.array_equal(a.update_matrix(), b.update_matrix())


class TestModels:
    @pytest.mark.parametrize("factory", [ising_qca, walk_qca, cnot_read_fixture])
    def test_qca_round_trip(self, factory):
        q = factory()
        m = model_from_json(through_text(model_to_json(q)))
        assert m.kind == "qca"
        same_qca(m.to_qca(), q)

    def test_sparse_qca_round_trip(self):
        q = walk_qca()
        m = model_from_json(through_text(model_to_json(q, sparse=True)))
        same_qca(m.to_qca(), q)

    def test_cqca_round_trip(self):
        cq = heisenberg_cqca(1.0, 0.2, 2)
        m = model_from_json(through_text(model_to_json(cq)))
        assert isinstance(m.definition, CqcaDefinition)
        assert m.definition.colors == cq.colors
        for a, b in zip(m.definition.operators, cq.operators):
            a = a.toarray() if sp.issparse(a) else a
            assert np.array_equal(a, b)
        assert [r.name for r in m.to_qca().layout.registers][-2:] == ["color", "clock"]

    def test_watrous_round_trip(self, rng):
        w = WatrousPartitionedDef(2, 1, 3, random_unitary(rng, 6))
        m = model_from_json(through_text(model_to_json(w)))
        assert np.array_equal(m.definition.V, w.V)
        assert m.to_qca().name == "watrous"

    def test_margolus_round_trip(self, rng):
        md = MargolusDef(1, 2, (2, 2), random_unitary(rng, 4), random_unitary(rng, 4))
        m = model_from_json(through_text(model_to_json(md)))
        assert np.array_equal(m.definition.U0, md.U0) and np.array_equal(m.definition.U1, md.U1)

    @pytest.mark.parametrize("name", BUILDERS)
    def test_builder_documents(self, name):
        m = model_from_json(through_text(builder_document(name)))
        assert m.kind == "builder"

    def test_builder_params(self):
        m = model_from_json(builder_document("ising", J=0.5, dt=0.2))
        same_qca(m.to_qca(), ising_qca(0.5, 0.2))

    def test_universal_document(self):
        m = model_from_json(through_text(universal_document()))
        assert m.to_qca().layout == universal_qca().layout

    @pytest.mark.parametrize("doc", [
        {"format": "other"},
        {"format": "luqca-model", "version": 2, "model": "qca"},
        {"format": "luqca-model", "version": 1, "model": "nope"},
        {"format": "luqca-model", "version": 1, "model": "qca"},
        {"format": "luqca-model", "version": 1, "model": "builder", "builder": "zzz"},
        {"format": "luqca-model", "version": 1, "model": "builder", "builder": "ising",
         "params": {"bogus": 1}},
        [],
    ])
    def test_bad_documents(self, doc):
        with pytest.raises(ModelFormatError):
            model_from_json(doc)

    def test_invalid_definition_is_format_error(self):
        doc = model_to_json(ising_qca())
        doc["quiescent"] = 7
        with pytest.raises(ModelFormatError):
            model_from_json(doc)

    def test_unknown_builder_name(self):
        with pytest.raises(ModelFormatError):
            builder_document("nope")

    def test_files(self, tmp_path):
        path = tmp_path / "m.json"
        write_json(path, model_to_json(ising_qca()))
        same_qca(read_model(path).to_qca(), ising_qca())
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ModelFormatError):
            read_model(bad)


class TestStates:
    def test_dense_json_round_trip_bit_exact(self, rng):
        q = walk_qca()
        s = random_state(Region.line(3), q.layout, rng)
        back = state_from_json(through_text(state_to_json(s, threshold=0.0)))
        assert isinstance(back, RegionState)
        assert np.array_equal(back.amps, s.amps)
        assert back.region == s.region

    def test_classical_registers_kept(self, rng):
        L = CellLayout([Register("q", 2), Register("c", 3, True)])
        s = random_state(Region.line(3, boundary=TORUS), L, rng, np.array([[2], [0], [1]]))
        back = state_from_json(through_text(state_to_json(s, threshold=0.0)))
        assert np.array_equal(back.classical, s.classical)
        assert np.array_equal(back.amps, s.amps)

    def test_sparse_large_region(self):
        s = walk_particle_state(Region.line(64), 30, "down")
        doc = through_text(state_to_json(s))
        assert len(doc["entries"]) == 1 and doc["entries"][0][0] > 2**64
        back = state_from_json(doc)
        assert isinstance(back, SparseState)
        assert np.array_equal(back.digits, s.digits)

    def test_entries_match_full_vector(self, rng):
        s = random_state(Region.line(2), CellLayout.single(3), rng)
        entries = snapshot_entries(s, 0.0)
        assert [i for i, _ in entries] == list(range(9))
        assert np.array_equal(np.array([a for _, a in entries]), s.amps)

    def test_threshold_drops_small(self):
        s = RegionState(Region.line(1), CellLayout.single(2), np.array([1.0, 1e-14]))
        assert len(snapshot_entries(s)) == 1

    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_file_round_trip(self, rng, tmp_path, fmt):
        s = random_state(Region.line(3, boundary=TORUS), walk_qca().layout, rng)
        s.t = 4
        path = tmp_path / f"state.{fmt}"
        write_state(path, s, fmt, threshold=0.0)
        back = read_state(path)
        assert back.t == 4
        assert np.array_equal(back.amps, s.amps)

    def test_unknown_format(self, rng, tmp_path):
        s = random_state(Region.line(2), CellLayout.single(2), rng)
        with pytest.raises(ValueError):
            write_state(tmp_path / "x", s, "xml")

    def test_bad_state_document(self):
        with pytest.raises(ModelFormatError):
            state_from_json({"format": "luqca-model"})
        with pytest.raises(ModelFormatError):
            state_from_json({"format": "luqca-state", "region": {}})


class TestTables:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, "sz", ["step", "site_0"], [[0, 1.0], [1, -0.25]])
        text = path.read_text().splitlines()
        assert text[0] == f"{CSV_HEADER} sz"
        kind, cols, rows = read_table(path)
        assert kind == "sz" and cols == ["step", "site_0"]
        assert rows == [["0", "1.0"], ["1", "-0.25"]]

    def test_missing_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ModelFormatError):
            read_table(path)
