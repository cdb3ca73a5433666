# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled word-evaluation kernel.

Each point is pushed through the whole word before the next one starts, so the
chain-rule product stays in registers.  The opcode layout is shared with the
numpy implementation in ``_pykernels.py``.
"""
import numpy as np

from libc.math cimport sinh, asinh, sqrt, log, fabs, floor, hypot

cdef double U_MAX = 700.0
cdef double S_BIG = 350.0
cdef int NEWTON_ITERS = 60

cdef enum:
    OP_CHART_AFFINE = 1
    OP_BLOCK_AFFINE = 2
    OP_BLOCK_FLOW = 3
    OP_HERMITE = 4
    OP_HERMITE_INV = 5


cdef inline double _y_of_u(double u) nogil:
    cdef double au = fabs(u)
    cdef double left = 2.0 / ((2.0 + au) + sqrt(au * au + 4.0))
    if u <= 0.0:
        return left
    return 1.0 - left


cdef inline double _dudy(double y) nogil:
    return 1.0 / (y * y) + 1.0 / ((1.0 - y) * (1.0 - y))


cdef inline double _chart_affine(double y, double a, double b, double* der) nogil:
    # cosh v is taken as hypot(1, sinh v) of values already at hand, which
    # leaves four transcendental calls per step
    cdef double u, s, s2, T, T2, ds, u2, y2
    der[0] = 1.0
    if (a == 1.0 and b == 0.0) or y <= 0.0 or y >= 1.0:
        return y
    u = 1.0 / (1.0 - y) - 1.0 / y
    if fabs(u) >= U_MAX:
        return y
    s = sinh(u)
    if fabs(s) < S_BIG:
        T = sinh(s)
        T2 = a * T + b
        s2 = asinh(T2)
        ds = a * hypot(1.0, T) / hypot(1.0, T2)
    else:
        s2 = s + log(a) if s > 0.0 else s - log(a)
        ds = 1.0
    u2 = asinh(s2)
    y2 = _y_of_u(u2)
    der[0] = _dudy(y) / _dudy(y2) * (hypot(1.0, s) / hypot(1.0, s2)) * ds
    return y2


cdef inline double _block_affine(double y, double lo, double hi, double a, double b,
                                 double* der) nogil:
    cdef double w = hi - lo
    cdef double p
    der[0] = 1.0
    if y <= lo or y >= hi:
        return y
    p = (y - lo) / w
    return lo + w * _chart_affine(p, a, b, der)


cdef inline double _block_flow(double y, const double[::1] data, Py_ssize_t o,
                               double* der) nogil:
    cdef double lo = data[o], hi = data[o + 1], c = data[o + 2]
    cdef double n_first = data[o + 3]
    cdef Py_ssize_t count = <Py_ssize_t> data[o + 4]
    cdef double u, x, n, a, b, d1, d2, d3, y1, y2, y3
    cdef Py_ssize_t k
    der[0] = 1.0
    if y <= 0.0 or y >= 1.0:
        return y
    u = 1.0 / (1.0 - y) - 1.0 / y
    if fabs(u) >= 7.0:
        return y
    x = sinh(sinh(u)) - c
    n = floor(x)
    if n - n_first < 0.0 or n - n_first >= <double> count:
        return y
    k = <Py_ssize_t> (n - n_first)
    a = data[o + 5 + 2 * k]
    b = data[o + 6 + 2 * k]
    if a == 1.0 and b == 0.0:
        return y
    n = n_first + k
    y1 = _chart_affine(y, 1.0, -n, &d1)
    y2 = _block_affine(y1, lo, hi, a, b, &d2)
    y3 = _chart_affine(y2, 1.0, n, &d3)
    der[0] = d1 * d2 * d3
    return y3


cdef inline double _herm(const double[::1] data, Py_ssize_t o, Py_ssize_t m, Py_ssize_t j,
                         double t, double* dp) nogil:
    cdef double k0 = data[o + 1 + j], k1 = data[o + 2 + j]
    cdef double v0 = data[o + 1 + m + j], v1 = data[o + 2 + m + j]
    cdef double m0 = data[o + 1 + 2 * m + j], m1 = data[o + 2 + 2 * m + j]
    cdef double h = k1 - k0
    cdef double t2 = t * t
    cdef double t3 = t2 * t
    dp[0] = ((6 * t2 - 6 * t) * v0 + (3 * t2 - 4 * t + 1) * h * m0
             + (-6 * t2 + 6 * t) * v1 + (3 * t2 - 2 * t) * h * m1) / h
    return ((2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * h * m0
            + (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * h * m1)


cdef inline double _hermite(double y, const double[::1] data, Py_ssize_t o, double* der) nogil:
    cdef Py_ssize_t m = <Py_ssize_t> data[o]
    cdef Py_ssize_t j = 0
    cdef double t, p
    der[0] = 1.0
    if y <= data[o + 1] or y >= data[o + m]:
        return y
    while j < m - 2 and data[o + 2 + j] <= y:
        j += 1
    t = (y - data[o + 1 + j]) / (data[o + 2 + j] - data[o + 1 + j])
    p = _herm(data, o, m, j, t, der)
    return p


cdef inline double _hermite_inv(double y, const double[::1] data, Py_ssize_t o,
                                double* der) nogil:
    cdef Py_ssize_t m = <Py_ssize_t> data[o]
    cdef Py_ssize_t j = 0
    cdef int it
    cdef double lo = 0.0, hi = 1.0, t, t_new, p, dp, r, h
    der[0] = 1.0
    if y <= data[o + 1 + m] or y >= data[o + 2 * m]:
        return y
    while j < m - 2 and data[o + 2 + m + j] <= y:
        j += 1
    h = data[o + 2 + j] - data[o + 1 + j]
    t = (y - data[o + 1 + m + j]) / (data[o + 2 + m + j] - data[o + 1 + m + j])
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    for it in range(NEWTON_ITERS):
        p = _herm(data, o, m, j, t, &dp)
        r = p - y
        if r < 0.0:
            lo = t
        elif r > 0.0:
            hi = t
        t_new = t - r / (dp * h)
        if not (t_new > lo and t_new < hi):
            t_new = 0.5 * (lo + hi)
        if fabs(t_new - t) <= 1e-16:
            t = t_new
            break
        t = t_new
    _herm(data, o, m, j, t, &dp)
    der[0] = 1.0 / dp
    return data[o + 1 + j] + t * h


cdef void _eval_point(const int[::1] ops, const long long[::1] offs, const double[::1] data,
                      double x, double* y_out, double* d_out) nogil:
    cdef Py_ssize_t k
    cdef double y = x, d, acc = 1.0
    cdef int op
    cdef Py_ssize_t o
    for k in range(ops.shape[0] - 1, -1, -1):
        op = ops[k]
        o = <Py_ssize_t> offs[k]
        if op == OP_CHART_AFFINE:
            y = _chart_affine(y, data[o], data[o + 1], &d)
        elif op == OP_BLOCK_AFFINE:
            y = _block_affine(y, data[o], data[o + 1], data[o + 2], data[o + 3], &d)
        elif op == OP_BLOCK_FLOW:
            y = _block_flow(y, data, o, &d)
        elif op == OP_HERMITE:
            y = _hermite(y, data, o, &d)
        elif op == OP_HERMITE_INV:
            y = _hermite_inv(y, data, o, &d)
        else:
            d = 1.0
        acc *= d
    y_out[0] = y
    d_out[0] = acc


def eval_word(ops, offs, data, x):
    """Evaluate a composed word at the points ``x``; returns (values, derivatives)."""
    cdef const int[::1] ops_v = np.ascontiguousarray(ops, dtype=np.int32)
    cdef const long long[::1] offs_v = np.ascontiguousarray(offs, dtype=np.int64)
    cdef const double[::1] data_v = np.ascontiguousarray(data, dtype=np.float64)
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef const double[::1] xs = xa.ravel()
    yo = np.empty(xs.shape[0], dtype=np.float64)
    do = np.empty(xs.shape[0], dtype=np.float64)
    cdef double[::1] yv = yo
    cdef double[::1] dv = do
    cdef Py_ssize_t i, n = xs.shape[0]
    with nogil:
        for i in range(n):
            _eval_point(ops_v, offs_v, data_v, xs[i], &yv[i], &dv[i])
    return yo.reshape(shape), do.reshape(shape)
