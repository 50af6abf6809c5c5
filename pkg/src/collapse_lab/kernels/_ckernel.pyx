# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled block kernel; mirrors ``_kernels_py`` operation by operation."""
from libc.math cimport floor

import numpy as np


cdef inline double _hermite(double x, double a, double h, const double[::1] y,
                            const double[::1] hd, Py_ssize_t n) noexcept nogil:
    cdef double s = (x - a) / h
    cdef double j = floor(s)
    if j < 0.0:
        j = 0.0
    if j > <double>(n - 2):
        j = <double>(n - 2)
    cdef double t = s - j
    cdef Py_ssize_t ji = <Py_ssize_t>j
    cdef double t2 = t * t
    cdef double t3 = t2 * t
    cdef double h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    cdef double h10 = t3 - 2.0 * t2 + t
    cdef double h01 = -2.0 * t3 + 3.0 * t2
    cdef double h11 = t3 - t2
    return h00 * y[ji] + h10 * hd[ji] + h01 * y[ji + 1] + h11 * hd[ji + 1]


def hermite_eval(x, double a, double h, const double[::1] y, const double[::1] hd):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = y.shape[0]
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _hermite(xv[i], a, h, y, hd, n)
    return out.reshape(np.shape(x))


def advance(double[::1] chi, signed char[::1] status, long long[::1] exit_step,
            const double[:, ::1] incr, Py_ssize_t n_steps, long long step0,
            double tab_a, double tab_h, const double[::1] tab_y, const double[::1] tab_hd,
            double c_drift, double sigma, double dt, double lo, double hi,
            double[:, ::1] rec, Py_ssize_t rec_every):
    cdef Py_ssize_t i, k, r, n = chi.shape[0], nt = tab_y.shape[0]
    cdef double x, L
    with nogil:
        for i in range(n):
            x = chi[i]
            k = 0
            if status[i] == 0:
                while k < n_steps:
                    L = _hermite(x, tab_a, tab_h, tab_y, tab_hd, nt)
                    x = x + c_drift * L * dt + sigma * incr[i, k]
                    k = k + 1
                    if x <= lo:
                        x = lo
                        status[i] = -1
                    elif x >= hi:
                        x = hi
                        status[i] = 1
                    if k % rec_every == 0:
                        rec[i, k // rec_every - 1] = x
                    if status[i] != 0:
                        exit_step[i] = step0 + k
                        break
                chi[i] = x
            # frozen (or just absorbed) paths keep their value at later records
            r = k // rec_every
            while r < n_steps // rec_every:
                rec[i, r] = x
                r = r + 1
