# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""
import numpy as np

BACKEND = "cython"


def apply_gathered(const double complex[::1] vec, const Py_ssize_t[::1] outer,
                   const Py_ssize_t[::1] local, const double complex[:, ::1] op):
    cdef Py_ssize_t M = outer.shape[0]
    cdef Py_ssize_t K = local.shape[0]
    cdef Py_ssize_t m, i, j, base
    cdef double complex acc
    out_arr = np.array(vec, dtype=np.complex128, copy=True)
    buf_arr = np.empty(K, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double complex[::1] buf = buf_arr
    with nogil:
        for m in range(M):
            base = outer[m]
            for j in range(K):
                buf[j] = vec[base + local[j]]
            for i in range(K):
                acc = 0
                for j in range(K):
                    acc = acc + op[i, j] * buf[j]
                out[base + local[i]] = acc
    return out_arr


def flip_phase(signed char[:, :, ::1] grid, int parity, const unsigned char[::1] flip_mask):
    cdef Py_ssize_t nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2]
    cdef Py_ssize_t x, y, z
    cdef int s, count = 0
    with nogil:
        for x in range(1, nx - 1):
            for y in range(1, ny - 1):
                for z in range(1, nz - 1):
                    if grid[x, y, z] == 0 or ((x + y + z - 3) & 1) != parity:
                        continue
                    s = (grid[x + 1, y, z] + grid[x - 1, y, z] + grid[x, y + 1, z]
                         + grid[x, y - 1, z] + grid[x, y, z + 1] + grid[x, y, z - 1])
                    if flip_mask[s + 6]:
                        grid[x, y, z] = -grid[x, y, z]
                        count += 1
    return count
