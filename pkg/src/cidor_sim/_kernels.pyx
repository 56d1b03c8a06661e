# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-tick kernels: node positions and range-based contact changes."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def positions(double t, const double[:, ::1] seg, double[:, ::1] out):
    cdef Py_ssize_t i, n = seg.shape[0]
    cdef double dt
    for i in range(n):
        dt = t - seg[i, 0]
        out[i, 0] = seg[i, 1] + seg[i, 3] * dt
        out[i, 1] = seg[i, 2] + seg[i, 4] * dt


def contact_changes(const double[:, ::1] xy, double radius, unsigned char[:, ::1] state):
    """Flip ``state`` to the pairs within ``radius``; return the flipped pairs."""
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t i, j, k = 0
    cdef double dx, dy, r2 = radius * radius
    cdef unsigned char now
    cdef cnp.ndarray[cnp.intp_t, ndim=2] buf = np.empty((16, 3), dtype=np.intp)
    for i in range(n):
        for j in range(i + 1, n):
            dx = xy[i, 0] - xy[j, 0]
            dy = xy[i, 1] - xy[j, 1]
            now = (dx * dx + dy * dy) <= r2
            if now != state[i, j]:
                state[i, j] = now
                state[j, i] = now
                if k == buf.shape[0]:
                    buf = np.concatenate([buf, np.empty_like(buf)])
                buf[k, 0] = i
                buf[k, 1] = j
                buf[k, 2] = now
                k += 1
    return buf[:k]
