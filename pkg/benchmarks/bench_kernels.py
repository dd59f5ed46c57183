"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``.  Each case is timed on
both backends (when the extension is built) and the results are checked
to agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from luqca import _kernels
from luqca.builders import ising_qca, walk_qca, walk_particle_state
from luqca.core import TORUS, Region
from luqca.engine import run
from luqca.state import _gather_indices, random_state


def best_of(func, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def gathered_case(n_qubits: int, block_qubits: int, rng):
    dims = (2,) * n_qubits
    outer, local = _gather_indices(dims, tuple(range(block_qubits)))
    vec = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    K = 2**block_qubits
    op = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
    return vec, outer, local, op


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(1)
    backends = _kernels.available_backends()
    print(f"default backend: {_kernels.BACKEND}; available: {', '.join(backends)}")
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")

    cases = []
    for n, k in ((16, 2), (20, 2), (20, 4)):
        vec, outer, local, op = gathered_case(n, k, rng)
        cases.append((f"apply_gathered n={n} block={k}",
                      lambda b, v=vec, o=outer, l=local, m=op: _kernels.apply_gathered(v, o, l, m,
                                                                                      backend=b)))
    for s in (16, 48):
        grid0 = rng.choice(np.array([-1, 1], dtype=np.int8), size=(s, s, s))
        padded0 = np.zeros((s + 2,) * 3, dtype=np.int8)
        padded0[1:-1, 1:-1, 1:-1] = grid0
        mask = np.zeros(13, dtype=np.uint8)
        mask[[4, 5, 6]] = 1

        def flip(b, p0=padded0, m=mask):
            g = p0.copy()
            for parity in (0, 1):
                _kernels.flip_phase(g, parity, m, backend=b)
            return g

        cases.append((f"flip_phase cube {s}^3", flip))

    for name, func in cases:
        results, times = {}, {}
        for b in backends:
            results[b] = func(b)
            times[b] = best_of(lambda: func(b), args.repeat)
        ref = results["numpy"]
        for b, r in results.items():
            if not np.allclose(r, ref, atol=1e-10):
                raise SystemExit(f"backend {b} disagrees on {name}")
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:40s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
              + f"{speed:9.1f}x")

    # end-to-end timings with the default backend
    state = random_state(Region.line(16, boundary=TORUS), ising_qca().layout, rng)
    t = best_of(lambda: run(state, ising_qca(), 5), 3)
    print(f"{'ising 16-cell torus, 5 steps':40s}{t * 1e3:10.2f}ms")
    walk = walk_particle_state(Region.line(64), 32)
    t = best_of(lambda: run(walk, walk_qca(), 30), 1)
    print(f"{'walk 64 sites, 30 steps (sparse)':40s}{t * 1e3:10.2f}ms")


if __name__ == "__main__":
    main()
