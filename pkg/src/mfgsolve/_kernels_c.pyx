# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled hot-loop kernels; see ``_kernels_py`` for reference semantics."""

from libc.math cimport exp

import numpy as np


def sarsa_scan(double[::1] q0, double[:, ::1] targets, double alpha,
               Py_ssize_t tail_from):
    cdef Py_ssize_t n_pairs = targets.shape[0]
    cdef Py_ssize_t n_sweeps = targets.shape[1]
    if q0.shape[0] != n_pairs:
        raise ValueError("q0 length does not match targets")

    final = np.empty(n_pairs, dtype=np.float64)
    tail = np.empty(n_pairs, dtype=np.float64)
    cdef double[::1] final_v = final
    cdef double[::1] tail_v = tail

    cdef Py_ssize_t p, l, count
    cdef double q, acc
    with nogil:
        for p in range(n_pairs):
            q = q0[p]
            acc = 0.0
            count = 0
            for l in range(n_sweeps):
                q = (1.0 - alpha) * q + alpha * targets[p, l]
                if l >= tail_from:
                    acc += q
                    count += 1
            final_v[p] = q
            tail_v[p] = acc / count if count > 0 else q
    return final, tail


def pg_ascent(double[:, ::1] logits, double[:, ::1] q, double[::1] lr,
              Py_ssize_t steps):
    cdef Py_ssize_t n_rows = logits.shape[0]
    cdef Py_ssize_t n_cols = logits.shape[1]
    if q.shape[0] != n_rows or q.shape[1] != n_cols:
        raise ValueError("logits and q shapes differ")
    if lr.shape[0] != n_rows:
        raise ValueError("lr must have one entry per row")

    out = np.array(logits, dtype=np.float64, copy=True)
    cdef double[:, ::1] th = out
    prob = np.empty(n_cols, dtype=np.float64)
    cdef double[::1] p = prob

    cdef Py_ssize_t s, x, a
    cdef double row_max, norm, row_value
    with nogil:
        for s in range(steps):
            for x in range(n_rows):
                row_max = th[x, 0]
                for a in range(1, n_cols):
                    if th[x, a] > row_max:
                        row_max = th[x, a]
                norm = 0.0
                for a in range(n_cols):
                    p[a] = exp(th[x, a] - row_max)
                    norm += p[a]
                row_value = 0.0
                for a in range(n_cols):
                    p[a] = p[a] / norm
                    row_value += p[a] * q[x, a]
                for a in range(n_cols):
                    th[x, a] += lr[x] * (p[a] * (q[x, a] - row_value))
    return out
