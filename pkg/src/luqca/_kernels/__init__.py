"""Hot kernels with a compiled backend and a numpy fallback.

The compiled module is used when it imports and ``LUQCA_PURE_PYTHON`` is
unset.  Both backends expose the same functions; callers pass contiguous
arrays of the documented dtypes.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_compiled = None
if not os.environ.get("LUQCA_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = _impl.BACKEND


def available_backends():
    names = ["numpy"]
    if _compiled is not None:
        names.append("cython")
    return names


def _module(backend):
    if backend is None:
        return _impl
    if backend == "numpy":
        return _pykernels
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown kernel backend {backend!r}")


def apply_gathered(vec, outer, local, op, backend=None):
    """Apply ``op`` (K x K) to every block ``outer[m] + local`` of ``vec``."""
    mod = _module(backend)
    return mod.apply_gathered(
        np.ascontiguousarray(vec, dtype=np.complex128),
        np.ascontiguousarray(outer, dtype=np.intp),
        np.ascontiguousarray(local, dtype=np.intp),
        np.ascontiguousarray(op, dtype=np.complex128),
    )


def flip_phase(grid, parity, flip_mask, backend=None):
    """Neighbour-sum flip rule for one colour of a zero-bordered int8 grid (in place)."""
    mod = _module(backend)
    if grid.dtype != np.int8 or not grid.flags.c_contiguous:
        raise TypeError("grid must be a C-contiguous int8 array")
    mask = np.ascontiguousarray(flip_mask, dtype=np.uint8)
    if mod is _pykernels:
        mask = mask.astype(bool)
    return mod.flip_phase(grid, int(parity), mask)
