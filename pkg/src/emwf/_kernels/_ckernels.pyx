# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled periodic Lagrange interpolation (same contract as the NumPy version)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    i = i % n
    if i < 0:
        i += n
    return i


cdef void _weights(double t, int order, double* w) noexcept nogil:
    # w_s = c_s * prod_{r<s}(t - x_r) * prod_{r>s}(t - x_r), c_s = 1 / prod_{r!=s}(x_s - x_r)
    cdef int s, r
    cdef int first = -(order // 2 - 1)
    cdef double pre[17]
    cdef double suf[17]
    cdef double c
    pre[0] = 1.0
    for s in range(order):
        pre[s + 1] = pre[s] * (t - (first + s))
    suf[order] = 1.0
    for s in range(order - 1, -1, -1):
        suf[s] = suf[s + 1] * (t - (first + s))
    for s in range(order):
        c = 1.0
        for r in range(order):
            if r != s:
                c *= (s - r)
        w[s] = pre[s] * suf[s + 1] / c


def interp_periodic(values, origin, spacing, points, int order=6):
    varr = np.ascontiguousarray(values, dtype=np.complex128)
    if varr.ndim != 4:
        raise ValueError("values must have shape [nf, n0, n1, n2]")
    # real view with re/im interleaved on the last axis; avoids C complex multiplies
    cdef double[:, :, :, ::1] v = varr.view(np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t nf = v.shape[0]
    if nf > 16:
        raise ValueError("at most 16 fields per call")
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t[3] shape
    cdef double[3] org
    cdef double[3] h
    cdef int[3] m
    cdef int a
    for a in range(3):
        shape[a] = varr.shape[a + 1]
        org[a] = origin[a]
        h[a] = spacing[a]
        m[a] = 1 if shape[a] == 1 else order
    if order < 2 or order > 16 or order % 2:
        raise ValueError("order must be an even number between 2 and 16")
    out_arr = np.zeros((n, nf), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double w0[16]
    cdef double w1[16]
    cdef double w2[16]
    cdef Py_ssize_t i0[16]
    cdef Py_ssize_t i1[16]
    cdef Py_ssize_t i2[16]
    cdef Py_ssize_t p, f, i, j, k, base
    cdef double u, fl, wij, wk
    cdef double acc_re[16]
    cdef double acc_im[16]
    cdef Py_ssize_t col
    cdef int first = -(order // 2 - 1)
    with nogil:
        for p in range(n):
            if m[0] == 1:
                w0[0] = 1.0
                i0[0] = 0
            else:
                u = (pts[p, 0] - org[0]) / h[0]
                fl = floor(u)
                _weights(u - fl, order, w0)
                for i in range(order):
                    i0[i] = _wrap(<Py_ssize_t>fl + first + i, shape[0])
            if m[1] == 1:
                w1[0] = 1.0
                i1[0] = 0
            else:
                u = (pts[p, 1] - org[1]) / h[1]
                fl = floor(u)
                _weights(u - fl, order, w1)
                for i in range(order):
                    i1[i] = _wrap(<Py_ssize_t>fl + first + i, shape[1])
            if m[2] == 1:
                w2[0] = 1.0
                i2[0] = 0
            else:
                u = (pts[p, 2] - org[2]) / h[2]
                fl = floor(u)
                _weights(u - fl, order, w2)
                for i in range(order):
                    i2[i] = _wrap(<Py_ssize_t>fl + first + i, shape[2])
            for f in range(nf):
                acc_re[f] = 0.0
                acc_im[f] = 0.0
            for i in range(m[0]):
                for j in range(m[1]):
                    wij = w0[i] * w1[j]
                    for k in range(m[2]):
                        wk = wij * w2[k]
                        col = 2 * i2[k]
                        for f in range(nf):
                            acc_re[f] += wk * v[f, i0[i], i1[j], col]
                            acc_im[f] += wk * v[f, i0[i], i1[j], col + 1]
            for f in range(nf):
                out[p, f] = acc_re[f] + 1j * acc_im[f]
    return out_arr
