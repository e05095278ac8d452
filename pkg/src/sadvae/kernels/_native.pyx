# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fused affine forward/backward and the Adam update.

Determinism contract: results depend only on the input values, never on
array addresses. Reductions therefore use an explicit 8-lane partial-sum
structure fixed in the source (vectorizable without reassociation), and
the extension is compiled without -ffast-math.

Accepts float32 and float64 (training runs in float32, gradient checks in
float64).
"""

import numpy as np

from libc.math cimport pow, sqrt, sqrtf

ctypedef fused real:
    float
    double


cdef object _empty(Py_ssize_t rows, Py_ssize_t cols, bint single):
    if single:
        return np.empty((rows, cols), dtype=np.float32)
    return np.empty((rows, cols), dtype=np.float64)


cdef inline real _dot(const real* a, const real* b, Py_ssize_t n) noexcept nogil:
    """Fixed-order 8-lane dot product: lane k accumulates indices 8m + k."""
    cdef real acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0
    cdef real acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0
    cdef Py_ssize_t m = 0
    while m + 8 <= n:
        acc0 = acc0 + a[m] * b[m]
        acc1 = acc1 + a[m + 1] * b[m + 1]
        acc2 = acc2 + a[m + 2] * b[m + 2]
        acc3 = acc3 + a[m + 3] * b[m + 3]
        acc4 = acc4 + a[m + 4] * b[m + 4]
        acc5 = acc5 + a[m + 5] * b[m + 5]
        acc6 = acc6 + a[m + 6] * b[m + 6]
        acc7 = acc7 + a[m + 7] * b[m + 7]
        m += 8
    cdef real tail = 0
    while m < n:
        tail = tail + a[m] * b[m]
        m += 1
    return ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7)) + tail


def affine_forward(real[:, ::1] x, real[:, ::1] w, real[::1] b):
    """y[i, o] = b[o] + sum_j x[i, j] * w[o, j]"""
    cdef Py_ssize_t n = x.shape[0], d_in = x.shape[1], d_out = w.shape[0]
    out_np = _empty(n, d_out, real is float)
    cdef real[:, ::1] out = out_np
    cdef Py_ssize_t i, o
    with nogil:
        for i in range(n):
            for o in range(d_out):
                out[i, o] = b[o] + _dot(&x[i, 0] if d_in > 0 else NULL,
                                        &w[o, 0] if d_in > 0 else NULL, d_in)
    return out_np


def affine_backward_input(real[:, ::1] w, real[:, ::1] gy):
    """gx[i, j] = sum_o gy[i, o] * w[o, j]

    Row-major accumulation: per output row o, an elementwise AXPY into the
    gradient row. Element-parallel, so any vectorization keeps the exact
    per-element operation order.
    """
    cdef Py_ssize_t n = gy.shape[0], d_out = w.shape[0], d_in = w.shape[1]
    out_np = _empty(n, d_in, real is float)
    cdef real[:, ::1] gx = out_np
    cdef Py_ssize_t i, o, j
    cdef real g
    with nogil:
        for i in range(n):
            for j in range(d_in):
                gx[i, j] = 0
            for o in range(d_out):
                g = gy[i, o]
                for j in range(d_in):
                    gx[i, j] = gx[i, j] + g * w[o, j]
    return out_np


def affine_backward_weight(real[:, ::1] x, real[:, ::1] gy):
    """gw[o, j] = sum_i gy[i, o] * x[i, j]

    o-major traversal keeps each output row resident while the batch is
    accumulated into it.
    """
    cdef Py_ssize_t n = x.shape[0], d_in = x.shape[1], d_out = gy.shape[1]
    out_np = _empty(d_out, d_in, real is float)
    cdef real[:, ::1] gw = out_np
    cdef Py_ssize_t i, o, j
    cdef real g
    with nogil:
        for o in range(d_out):
            for j in range(d_in):
                gw[o, j] = 0
            for i in range(n):
                g = gy[i, o]
                for j in range(d_in):
                    gw[o, j] = gw[o, j] + g * x[i, j]
    return out_np


def affine_backward_bias(real[:, ::1] gy):
    """gb[o] = sum_i gy[i, o]"""
    cdef Py_ssize_t n = gy.shape[0], d_out = gy.shape[1]
    if real is float:
        out_np = np.zeros(d_out, dtype=np.float32)
    else:
        out_np = np.zeros(d_out, dtype=np.float64)
    cdef real[::1] gb = out_np
    cdef Py_ssize_t i, o
    with nogil:
        for i in range(n):
            for o in range(d_out):
                gb[o] = gb[o] + gy[i, o]
    return out_np


def adam_step(real[::1] param, real[::1] grad, real[::1] m, real[::1] v,
              long t, double lr, double beta1, double beta2, double eps):
    """Bias-corrected Adam update in place; t is the 1-based step count."""
    cdef Py_ssize_t size = param.shape[0]
    cdef real b1 = <real> beta1
    cdef real b2 = <real> beta2
    cdef real one = <real> 1.0
    cdef real bc1 = <real> (1.0 - pow(beta1, <double> t))
    cdef real bc2 = <real> (1.0 - pow(beta2, <double> t))
    cdef real rlr = <real> lr
    cdef real reps = <real> eps
    cdef real m_hat, v_hat
    cdef Py_ssize_t i
    with nogil:
        for i in range(size):
            m[i] = b1 * m[i] + (one - b1) * grad[i]
            v[i] = b2 * v[i] + (one - b2) * grad[i] * grad[i]
            m_hat = m[i] / bc1
            v_hat = v[i] / bc2
            if real is float:
                param[i] = param[i] - rlr * m_hat / (sqrtf(v_hat) + reps)
            else:
                param[i] = param[i] - rlr * m_hat / (sqrt(v_hat) + reps)
