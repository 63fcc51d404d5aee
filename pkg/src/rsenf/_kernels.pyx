# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_fallback`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, floor, M_PI

cnp.import_array()


def demodulate_frames(samples, double cycles_per_sample, Py_ssize_t block):
    cdef const double[::1] x = np.ascontiguousarray(samples, dtype=np.float64)
    cdef Py_ssize_t n_blocks = x.shape[0] // block
    out = np.empty(n_blocks, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef Py_ssize_t b, j, n
    cdef double re, im, ph, v
    for b in range(n_blocks):
        re = 0.0
        im = 0.0
        for j in range(block):
            n = b * block + j
            ph = n * cycles_per_sample
            ph = 2.0 * M_PI * (ph - floor(ph))
            v = x[n]
            re += v * cos(ph)
            im -= v * sin(ph)
        o[b] = (re + 1j * im) / block
    return out


def fill_idle_gaps(frames, Py_ssize_t out_rows):
    cdef const double[:, ::1] f = np.ascontiguousarray(frames, dtype=np.float64)
    cdef Py_ssize_t n_frames = f.shape[0], rows = f.shape[1]
    out = np.empty((n_frames, out_rows), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t k, j
    cdef double fill
    for k in range(n_frames):
        for j in range(rows):
            o[k, j] = f[k, j]
        if out_rows == rows:
            continue
        if k == 0:
            fill = f[1, rows - 1]
        elif k == n_frames - 1:
            fill = f[k - 1, rows - 1]
        else:
            fill = 0.5 * (f[k - 1, rows - 1] + f[k + 1, rows - 1])
        for j in range(rows, out_rows):
            o[k, j] = fill
    return out


def sliding_ncc(query, reference):
    q_arr = np.asarray(query, dtype=np.float64)
    r_arr = np.asarray(reference, dtype=np.float64)
    q_arr = np.ascontiguousarray(q_arr - q_arr.mean())
    r_arr = np.ascontiguousarray(r_arr - r_arr.mean())
    cdef const double[::1] q = q_arr
    cdef const double[::1] r = r_arr
    cdef Py_ssize_t m = q.shape[0], n = r.shape[0]
    cdef Py_ssize_t n_lags = n - m + 1
    out = np.empty(n_lags, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double q_norm = 0.0, s1 = 0.0, s2 = 0.0, num, var, v, tiny = 0.0
    for j in range(n):
        tiny += r[j] * r[j]
    tiny = 1e-10 * m * max(tiny / n, 2.2250738585072014e-308)
    for j in range(m):
        q_norm += q[j] * q[j]
    q_norm = sqrt(q_norm)
    for j in range(m):
        s1 += r[j]
        s2 += r[j] * r[j]
    for i in range(n_lags):
        if i > 0:
            v = r[i - 1]
            s1 -= v
            s2 -= v * v
            v = r[i + m - 1]
            s1 += v
            s2 += v * v
        num = 0.0
        for j in range(m):
            num += q[j] * r[i + j]
        var = s2 - s1 * s1 / m
        if var <= tiny:
            o[i] = np.nan
        else:
            o[i] = num / (q_norm * sqrt(var))
    return out


def single_bin_dft(rows, double cycles_per_sample):
    cdef const double[:, ::1] x = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t n_rows = x.shape[0], n = x.shape[1]
    out = np.empty(n_rows, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double[::1] c = np.empty(n, dtype=np.float64)
    cdef double[::1] s = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, k
    cdef double ph, re, im
    for k in range(n):
        ph = k * cycles_per_sample
        ph = 2.0 * M_PI * (ph - floor(ph))
        c[k] = cos(ph)
        s[k] = sin(ph)
    for i in range(n_rows):
        re = 0.0
        im = 0.0
        for k in range(n):
            re += x[i, k] * c[k]
            im -= x[i, k] * s[k]
        o[i] = re + 1j * im
    return out
