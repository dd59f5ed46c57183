"""Numpy implementations of the hot loops.

These are the reference versions; ``_ckernels`` must agree with them
to rounding.
"""
from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def apply_gathered(vec, outer, local, op):
    """Return a copy of ``vec`` with ``op`` applied on every gathered block.

    ``outer[m] + local[j]`` is the flat index of local basis state ``j``
    inside outer block ``m``.
    """
    idx = outer[:, None] + local[None, :]
    out = vec.copy()
    out[idx] = vec[idx] @ op.T
    return out


def flip_phase(grid, parity, flip_mask):
    """One colour phase of the neighbour-sum flip rule on a padded 3D grid.

    ``grid`` holds -1, 0, +1 and has a one-cell zero border that is never
    updated.  Cells with ``(x + y + z) % 2 == parity`` flip sign when the
    sum of their six neighbours indexes a true entry of ``flip_mask``
    (offset by 6).  Returns the number of flipped cells; ``grid`` is
    modified in place.
    """
    inner = grid[1:-1, 1:-1, 1:-1]
    sums = (
        grid[2:, 1:-1, 1:-1] + grid[:-2, 1:-1, 1:-1]
        + grid[1:-1, 2:, 1:-1] + grid[1:-1, :-2, 1:-1]
        + grid[1:-1, 1:-1, 2:] + grid[1:-1, 1:-1, :-2]
    ).astype(np.int64)
    nx, ny, nz = inner.shape
    colour = np.add.outer(np.add.outer(np.arange(nx), np.arange(ny)), np.arange(nz)) % 2
    mask = (inner != 0) & (colour == parity) & flip_mask[sums + 6]
    inner[mask] *= -1
    return int(mask.sum())
