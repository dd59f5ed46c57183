from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from luqca import _kernels
from luqca.state import _gather_indices

BACKENDS = _kernels.available_backends()


def test_numpy_backend_always_available():
    assert "numpy" in BACKENDS
    assert _kernels.BACKEND in BACKENDS


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels._module("fortran")


@pytest.mark.parametrize("backend", BACKENDS)
class TestApplyGathered:
    def test_matches_kron_oracle(self, backend, rng):
        # op on qubit 1 of three: I (x) op (x) I
        vec = rng.normal(size=8) + 1j * rng.normal(size=8)
        op = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        outer, local = _gather_indices((2, 2, 2), (1,))
        out = _kernels.apply_gathered(vec, outer, local, op, backend=backend)
        ref = np.kron(np.kron(np.eye(2), op), np.eye(2)) @ vec
        assert np.allclose(out, ref, atol=1e-13)

    def test_input_not_modified(self, backend, rng):
        vec = rng.normal(size=16).astype(complex)
        keep = vec.copy()
        outer, local = _gather_indices((2,) * 4, (0, 3))
        _kernels.apply_gathered(vec, outer, local, np.eye(4, dtype=complex)[::-1],
                                backend=backend)
        assert np.array_equal(vec, keep)


@given(st.lists(st.integers(2, 3), min_size=2, max_size=5), st.data())
def test_backends_agree_on_gathered_blocks(dims, data):
    n = len(dims)
    k = data.draw(st.integers(1, min(3, n)))
    axes = tuple(data.draw(st.permutations(range(n)))[:k])
    seed = data.draw(st.integers(0, 2**16))
    rng = np.random.default_rng(seed)
    size = int(np.prod(dims))
    vec = rng.normal(size=size) + 1j * rng.normal(size=size)
    K = int(np.prod([dims[a] for a in axes]))
    op = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
    outer, local = _gather_indices(tuple(dims), axes)
    results = [_kernels.apply_gathered(vec, outer, local, op, backend=b) for b in BACKENDS]
    for r in results[1:]:
        assert np.allclose(r, results[0], atol=1e-12)


@given(st.integers(1, 6), st.integers(0, 2**16),
       st.sets(st.integers(-6, 6), max_size=6), st.integers(0, 1))
def test_backends_agree_on_flip_phase(s, seed, flip_set, parity):
    rng = np.random.default_rng(seed)
    grid = np.zeros((s + 2,) * 3, dtype=np.int8)
    grid[1:-1, 1:-1, 1:-1] = rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=(s, s, s))
    mask = np.zeros(13, dtype=np.uint8)
    for v in flip_set:
        mask[v + 6] = 1
    outs = []
    for b in BACKENDS:
        g = grid.copy()
        count = _kernels.flip_phase(g, parity, mask, backend=b)
        outs.append((g, count))
    for g, c in outs[1:]:
        assert np.array_equal(g, outs[0][0]) and c == outs[0][1]


def test_flip_phase_border_untouched():
    grid = np.zeros((4, 4, 4), dtype=np.int8)
    grid[1:-1, 1:-1, 1:-1] = -1
    mask = np.ones(13, dtype=np.uint8)
    for b in BACKENDS:
        g = grid.copy()
        _kernels.flip_phase(g, 0, mask, backend=b)
        assert g[0].sum() == 0 and g[-1].sum() == 0


def test_flip_phase_requires_int8():
    with pytest.raises(TypeError):
        _kernels.flip_phase(np.zeros((3, 3, 3)), 0, np.zeros(13, dtype=np.uint8))
