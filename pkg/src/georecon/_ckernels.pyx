# cython: language_level=3
"""Compiled inner loops. Must agree bit for bit with ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, INFINITY

cnp.import_array()


def splat_zbuffer(const double[::1] u, const double[::1] v, const double[::1] z,
                  const cnp.int64_t[::1] ids, Py_ssize_t width, Py_ssize_t height,
                  double half):
    """Stamp each point's square footprint into a z-buffer.

    A pixel is covered when its center lies within ``half`` of the point in
    both axes. Smaller depth wins; equal depths go to the smaller id.
    """
    cdef Py_ssize_t n = u.shape[0]
    zbuf_arr = np.full((height, width), np.inf, dtype=np.float64)
    win_arr = np.full((height, width), -1, dtype=np.int64)
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef cnp.int64_t[:, ::1] win = win_arr
    cdef Py_ssize_t k, px, py, lo_u, lo_v, hi_u, hi_v, span
    cdef double x, y, d
    cdef cnp.int64_t pid
    span = <Py_ssize_t>floor(2.0 * half) + 3
    with nogil:
        for k in range(n):
            x = u[k]
            y = v[k]
            d = z[k]
            pid = ids[k]
            lo_u = <Py_ssize_t>floor(x - half - 0.5) - 1
            lo_v = <Py_ssize_t>floor(y - half - 0.5) - 1
            hi_u = lo_u + span
            hi_v = lo_v + span
            if lo_u < 0:
                lo_u = 0
            if lo_v < 0:
                lo_v = 0
            if hi_u > width - 1:
                hi_u = width - 1
            if hi_v > height - 1:
                hi_v = height - 1
            for py in range(lo_v, hi_v + 1):
                if not (fabs((<double>py + 0.5) - y) <= half):
                    continue
                for px in range(lo_u, hi_u + 1):
                    if not (fabs((<double>px + 0.5) - x) <= half):
                        continue
                    if d < zbuf[py, px] or (d == zbuf[py, px] and pid < win[py, px]):
                        zbuf[py, px] = d
                        win[py, px] = pid
    return zbuf_arr, win_arr


def uncovered_counts(const cnp.int64_t[::1] members, const cnp.int64_t[::1] offsets,
                     const cnp.uint8_t[::1] covered, const cnp.uint8_t[::1] skip):
    """Per set, the number of members not yet covered (sets in CSR layout)."""
    cdef Py_ssize_t m = offsets.shape[0] - 1
    out_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t c
    with nogil:
        for i in range(m):
            if skip[i]:
                continue
            c = 0
            for j in range(offsets[i], offsets[i + 1]):
                if not covered[members[j]]:
                    c += 1
            out[i] = c
    return out_arr
