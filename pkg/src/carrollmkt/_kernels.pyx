# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-trade kernels: single-pass max-shifted exponential sums.

Mirrors _kernels_py; selected at import by carrollmkt.kernels when built.
"""

from libc.math cimport exp, log

import numpy as np

BACKEND = "cython"


def cost(double[::1] q, double b):
    cdef Py_ssize_t i, n = q.shape[0]
    cdef double m = q[0], s = 0.0
    for i in range(1, n):
        if q[i] > m:
            m = q[i]
    m /= b
    for i in range(n):
        s += exp(q[i] / b - m)
    return b * (m + log(s))


def masked_sums(double[::1] q, double b, const unsigned char[::1] mask):
    cdef Py_ssize_t i, n = q.shape[0]
    cdef double m = q[0], s_in = 0.0, s_out = 0.0, w
    for i in range(1, n):
        if q[i] > m:
            m = q[i]
    m /= b
    for i in range(n):
        w = exp(q[i] / b - m)
        if mask[i]:
            s_in += w
        else:
            s_out += w
    return m, s_in, s_out


def softmax_sum(double[::1] q, double b):
    cdef Py_ssize_t i, n = q.shape[0]
    cdef double m = q[0], s = 0.0, acc = 0.0
    for i in range(1, n):
        if q[i] > m:
            m = q[i]
    m /= b
    for i in range(n):
        s += exp(q[i] / b - m)
    for i in range(n):
        acc += exp(q[i] / b - m) / s
    return acc


def apply_delta(double[::1] q, const unsigned char[::1] mask, double delta):
    cdef Py_ssize_t i, n = q.shape[0]
    for i in range(n):
        if mask[i]:
            q[i] += delta
