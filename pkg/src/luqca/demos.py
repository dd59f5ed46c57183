"""Reference demonstrations, each checked against an independent oracle.

Every demo returns a :class:`DemoResult` with a pass flag, a report
dictionary and a CSV-ready table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import builders
from .coloring import cqca_period
from .core import TORUS, Region
from .engine import run
from .formats import cell_label
from .linalg import herm_exp
from .state import RegionState, SparseState, random_state

DEMOS = ("ising", "heisenberg", "walk", "amplify", "shift")


@dataclass
class DemoResult:
    name: str
    passed: bool
    report: dict
    table_kind: str = ""
    columns: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        out += [f"  {k}: {v}" for k, v in self.report.items()]
        return out


def _sz_profile(vec: np.ndarray, n: int) -> list[float]:
    probs = np.abs(vec.reshape((2,) * n)) ** 2
    out = []
    for k in range(n):
        marg = probs.sum(axis=tuple(i for i in range(n) if i != k))
        out.append(float(marg[0] - marg[1]))
    return out


def ising_demo(cells: int = 4, steps: int = 5, J: float = 1.0, dt: float = 0.1,
               seed: int = 0, tol: float = 1e-9) -> DemoResult:
    """Engine against the dense exponential of the periodic Ising Hamiltonian."""
    qca = builders.ising_qca(J, dt)
    region = Region.line(cells, boundary=TORUS)
    state = random_state(region, qca.layout, np.random.default_rng(seed))
    v0 = state.amps.copy()
    H = builders.ising_hamiltonian(J, cells, periodic=True)
    rows, worst = [], 0.0

    def observe(s):
        nonlocal worst
        ref = herm_exp(H, s.t * dt) @ v0
        worst = max(worst, float(np.max(np.abs(s.amps - ref))))
        rows.append([s.t] + _sz_profile(s.amps, cells))

    run(state, qca, steps, observer=observe)
    return DemoResult("ising", worst < tol,
                      {"cells": cells, "steps": steps, "max_amplitude_deviation": worst},
                      "sz", ["step"] + [cell_label(c) for c in region.cells], rows)


def heisenberg_demo(cells: int = 4, dt: float = 0.2, J: float = 1.0,
                    ks: tuple[int, ...] = (2, 4, 8, 16)) -> DemoResult:
    """Trotter error against the dense exponential, and the k -> 2k error ratio."""
    errors = {k: builders.trotter_error(J, dt, k, cells) for k in ks}
    ratios = {k: errors[k] / errors[2 * k] for k in ks if 2 * k in errors}
    monotone = all(errors[a] >= errors[b] for a, b in zip(ks, ks[1:]))
    checked = [ratios[k] for k in (4, 8) if k in ratios]
    passed = monotone and bool(checked) and all(1.6 <= r <= 2.4 for r in checked)
    rows = [[k, errors[k], ratios.get(k, "")] for k in ks]
    return DemoResult("heisenberg", passed,
                      {"cells": cells, "dt": dt, "errors": errors, "ratios": ratios,
                       "monotone": monotone},
                      "trotter", ["k", "error", "ratio_to_2k"], rows)


def walk_demo(sites: int = 64, steps: int = 30, tol: float = 1e-12) -> DemoResult:
    """Single particle in the middle of a line: engine against the amplitude recurrences.

    The line is widened to ``2 * steps + 2`` sites when needed so the particle
    never reaches the boundary.
    """
    sites = max(sites, 2 * steps + 2)
    params = builders.WalkParams.balanced()
    qca = builders.walk_qca(params)
    region = Region.line(sites)
    start = sites // 2
    state = builders.walk_particle_state(region, start, "up")
    reference = builders.walk_recurrence(params, range(sites), start, "up", steps)
    rows, worst, norm_dev = [], 0.0, 0.0

    def observe(s):
        nonlocal worst, norm_dev
        table = builders.walk_amplitudes(s)
        ref = reference[s.t]
        for (x, u, d), (_, ru, rd) in zip(table, ref):
            worst = max(worst, abs(u - ru), abs(d - rd))
        probs = [abs(u) ** 2 + abs(d) ** 2 for _, u, d in table]
        norm_dev = max(norm_dev, abs(math.fsum(probs) - 1.0))
        rows.append([s.t] + probs)

    run(state, qca, steps, observer=observe)
    return DemoResult("walk", worst < tol and norm_dev < tol,
                      {"sites": sites, "steps": steps, "max_recurrence_deviation": worst,
                       "max_probability_deviation": norm_dev},
                      "walk-probability", ["step"] + [cell_label(c) for c in region.cells], rows)


def amplification_check(spec: builders.AmplificationSpec, periods: int | None = None) -> dict:
    """Permutation structure, all-minus fixed point and linearity on the superposed corner."""
    op = builders.amplification_operator(spec.flip_set).tocsr()
    data = op.data
    perm = bool(np.all(data == 1) and op.nnz == op.shape[0]
                and np.all(np.diff(op.indptr) == 1)
                and np.unique(op.indices).size == op.shape[0])
    report = builders.amplification_demo(spec)
    if periods is None:
        periods = report.steps + max(report.plus_orbit.cycle_length, 1)
    cqca = builders.amplification_cqca(spec)
    s = spec.s
    minus = -np.ones((s, s, s), dtype=np.int8)
    minus_state = SparseState.basis(spec.region, cqca.layout,
                                    builders.amplification_cells(spec, 2))
    after = cqca_period(minus_state, cqca, periods, quiescent=0)
    fixed = bool(after.amps.size == 1
                 and np.array_equal(after.digits[0, :, 0], minus_state.digits[0, :, 0])
                 and abs(after.amps[0] - 1) == 0)
    plus = minus.copy()
    plus[0, 0, 0] = 1
    a, b = spec.psi
    final = cqca_period(builders.amplification_state(spec), cqca, periods, quiescent=0)
    expected = SparseState(
        spec.region, cqca.layout,
        np.array([builders.grid_to_cells(builders.evolve_grid(plus, spec.flip_mask, periods)),
                  builders.grid_to_cells(builders.evolve_grid(minus, spec.flip_mask, periods))]
                 )[:, :, None],
        np.array([a, b]))
    linear = bool(np.array_equal(final.digits, expected.digits)
                  and np.array_equal(final.amps, expected.amps))
    return {"permutation": perm, "minus_fixed_point": fixed, "linearity": linear,
            "periods": periods, "orbit": report}


def amplify_demo(s: int = 3, flip_set=(-2, -1, 0)) -> DemoResult:
    spec = builders.AmplificationSpec(s, frozenset(flip_set))
    check = amplification_check(spec)
    rep = check.pop("orbit")
    passed = check["permutation"] and check["minus_fixed_point"] and check["linearity"]
    flips = rep.plus_orbit.flips
    rows = [[i // 2, i % 2, c] for i, c in enumerate(flips)]
    report = {"s": s, "flip_set": sorted(spec.flip_set), **check,
              "orbit_steps": rep.steps, "reached_fixed_point": rep.reached_fixed_point,
              "cycle_length": rep.plus_orbit.cycle_length, "amplified": rep.amplified,
              "fidelity": rep.fidelity}
    return DemoResult("amplify", passed, report, "amplification-flips",
                      ["period", "phase", "flipped"], rows)


def shift_demo(cells: int = 6, steps: int = 4, seed: int = 0, tol: float = 1e-15) -> DemoResult:
    """Random data on a torus; after k steps it must equal the k-rotated input."""
    qca = builders.shift_right_qca(2)
    region = Region.line(cells, boundary=TORUS)
    rng = np.random.default_rng(seed)
    data = rng.normal(size=2**cells) + 1j * rng.normal(size=2**cells)
    data /= np.linalg.norm(data)
    empty = np.array([1.0, 0.0])
    tensor = data.reshape((2,) * cells)
    for _ in range(cells):
        tensor = np.multiply.outer(tensor, empty)
    order = [a for k in range(cells) for a in (k, cells + k)]
    state = RegionState(region, qca.layout, np.transpose(tensor, order).reshape(-1))
    rows, worst = [], 0.0

    def observe(st):
        nonlocal worst
        t = st.t
        amps = st.amps.reshape((2, 2) * cells)
        out = amps[tuple(slice(None) if i % 2 == 0 else 0 for i in range(2 * cells))]
        expected = _rotate(data, cells, t)
        fid = float(abs(np.vdot(expected, out.reshape(-1))) ** 2)
        worst = max(worst, abs(1.0 - fid))
        rows.append([t, fid])

    run(state, qca, steps, observer=observe)
    return DemoResult("shift", worst <= tol, {"cells": cells, "steps": steps,
                                               "max_fidelity_deviation": worst},
                      "shift-fidelity", ["step", "fidelity"], rows)


def _rotate(data: np.ndarray, cells: int, t: int) -> np.ndarray:
    """Move the content of cell ``x`` to cell ``x + t`` (cyclically)."""
    tensor = data.reshape((2,) * cells)
    axes = [(x - t) % cells for x in range(cells)]
    return np.transpose(tensor, axes).reshape(-1)


def run_demo(name: str, **kwargs) -> DemoResult:
    table = {"ising": ising_demo, "heisenberg": heisenberg_demo, "walk": walk_demo,
             "amplify": amplify_demo, "shift": shift_demo}
    if name not in table:
        raise ValueError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    return table[name](**kwargs)


__all__ = ["DEMOS", "DemoResult", "amplification_check", "amplify_demo", "heisenberg_demo",
           "ising_demo", "run_demo", "shift_demo", "walk_demo"]
