"""Brute-force amplification orbits in plain Python (no numpy, no package code).

Writes ``amplification_s{2,3}.json``.  Each file lists the spin grid after
every full period (black phase then white phase) until the first repeated
grid, starting from the all-minus cube with the corner at the origin set
to +1.  Cells outside the cube count as 0 in neighbour sums.

Regenerate with ``python tests/golden/gen_amplification.py``.
"""
from __future__ import annotations

import itertools
import json
import os

FLIP_SET = (-2, -1, 0)


def period(grid, s, flip_set):
    grid = dict(grid)
    flips = []
    for parity in (0, 1):
        new = dict(grid)
        count = 0
        for x, y, z in itertools.product(range(s), repeat=3):
            if (x + y + z) % 2 != parity:
                continue
            total = 0
            for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1),
                               (0, 0, -1)):
                total += grid.get((x + dx, y + dy, z + dz), 0)
            if total in flip_set:
                new[(x, y, z)] = -grid[(x, y, z)]
                count += 1
        grid = new
        flips.append(count)
    return grid, flips


def flat(grid, s):
    return [grid[c] for c in itertools.product(range(s), repeat=3)]


def orbit(s, flip_set=FLIP_SET):
    grid = {c: -1 for c in itertools.product(range(s), repeat=3)}
    grid[(0, 0, 0)] = 1
    history = [flat(grid, s)]
    flips = []
    while True:
        grid, f = period(grid, s, flip_set)
        flips.extend(f)
        g = flat(grid, s)
        if g in history:
            first = history.index(g)
            history.append(g)
            return {"s": s, "flip_set": list(flip_set), "grids": history, "flips": flips,
                    "first_repeat": [first, len(history) - 1],
                    "fixed_point": len(history) - 1 - first == 1}
        history.append(g)


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    for s in (2, 3):
        with open(os.path.join(here, f"amplification_s{s}.json"), "w") as fh:
            json.dump(orbit(s), fh)
            fh.write("\n")
