# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels.

Same contracts as ``_pycore``; eigenvector storage is transposed internally
(one eigenvector per row) so that QL rotations touch contiguous memory.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot, copysign

cnp.import_array()

cdef double EPS = np.finfo(float).eps
cdef double SAFEMIN = np.finfo(float).tiny


def tridiagonalize(double[:, ::1] a, bint want_vectors):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t k, i, j, m
    cdef double norm, alpha, vnorm, vp, s
    cdef double[::1] v = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] u = np.empty(n)
    cdef double[:, ::1] qt
    qt_arr = None
    if want_vectors:
        qt_arr = np.eye(n)
        qt = qt_arr
    for k in range(n - 2):
        m = n - k - 1
        norm = 0.0
        for i in range(m):
            v[i] = a[k + 1 + i, k]
            norm += v[i] * v[i]
        norm = sqrt(norm)
        if norm == 0.0:
            continue
        alpha = -norm if v[0] >= 0.0 else norm
        v[0] -= alpha
        vnorm = 0.0
        for i in range(m):
            vnorm += v[i] * v[i]
        vnorm = sqrt(vnorm)
        if vnorm == 0.0:
            continue
        for i in range(m):
            v[i] /= vnorm
        vp = 0.0
        for i in range(m):
            s = 0.0
            for j in range(m):
                s += a[k + 1 + i, k + 1 + j] * v[j]
            p[i] = s
            vp += v[i] * s
        for i in range(m):
            p[i] -= vp * v[i]
        for i in range(m):
            for j in range(m):
                a[k + 1 + i, k + 1 + j] -= 2.0 * (v[i] * p[j] + p[i] * v[j])
        for i in range(m):
            a[k + 1 + i, k] = 0.0
            a[k, k + 1 + i] = 0.0
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        if want_vectors:
            for j in range(n):
                u[j] = 0.0
            for i in range(m):
                for j in range(n):
                    u[j] += v[i] * qt[k + 1 + i, j]
            for i in range(m):
                for j in range(n):
                    qt[k + 1 + i, j] -= 2.0 * v[i] * u[j]
    diag = np.empty(n)
    off = np.zeros(n)
    cdef double[::1] dv = diag
    cdef double[::1] ov = off
    for i in range(n):
        dv[i] = a[i, i]
    for i in range(n - 1):
        ov[i] = a[i + 1, i]
    q = qt_arr.T.copy() if want_vectors else None
    return diag, off, q


cdef inline void _rotate_rows(double[:, ::1] zt, Py_ssize_t i, double c, double s) noexcept nogil:
    cdef Py_ssize_t k
    cdef Py_ssize_t n = zt.shape[1]
    cdef double f, g
    for k in range(n):
        f = zt[i + 1, k]
        g = zt[i, k]
        zt[i + 1, k] = s * g + c * f
        zt[i, k] = c * g - s * f


def tql(double[::1] d, double[::1] e, z, long max_iter):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t l, m, i
    cdef long sweeps = 0
    cdef double dd, g, r, s, c, p, f, b
    cdef bint underflow
    cdef bint vec = z is not None
    cdef double[:, ::1] zt
    zt_arr = None
    if n == 0:
        return 0
    if vec:
        zt_arr = np.ascontiguousarray(np.asarray(z).T)
        zt = zt_arr
    e[n - 1] = 0.0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = fabs(d[m]) + fabs(d[m + 1])
                if fabs(e[m]) <= EPS * dd or fabs(e[m]) < SAFEMIN:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_iter:
                if vec:
                    z[...] = zt_arr.T
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if vec:
                    _rotate_rows(zt, i, c, s)
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    if vec:
        z[...] = zt_arr.T
    return sweeps


def sturm_count(const double[::1] diag, const double[::1] off, double x):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double pivmin = 1.0
    cdef double q
    cdef long count = 0
    for i in range(n - 1):
        if off[i] * off[i] > pivmin:
            pivmin = off[i] * off[i]
    pivmin *= SAFEMIN
    q = diag[0] - x
    if fabs(q) < pivmin:
        q = pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if fabs(q) < pivmin:
            q = pivmin
        if q < 0.0:
            count += 1
    return count


cdef long _cyclic_count_one(const double[::1] diag, double x) noexcept nogil:
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double pivmin = SAFEMIN
    cdef double dlast = diag[n - 1] - x
    cdef double c = 1.0
    cdef double p = diag[0] - x
    cdef double inv
    cdef long count = 0
    for i in range(n - 2):
        if fabs(p) < pivmin:
            p = pivmin
        if p < 0.0:
            count += 1
        inv = 1.0 / p
        dlast -= c * c * inv
        p = diag[i + 1] - x - inv
        if i + 1 == n - 2:
            c = 1.0 - c * inv
        else:
            c = -c * inv
    if fabs(p) < pivmin:
        p = pivmin
    if p < 0.0:
        count += 1
    p = dlast - c * c / p
    if fabs(p) < pivmin:
        p = pivmin
    if p < 0.0:
        count += 1
    return count


def cyclic_count(const double[::1] diag, xs):
    cdef const double[::1] xv = np.ascontiguousarray(xs, dtype=float).ravel()
    out = np.empty(xv.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t j
    for j in range(xv.shape[0]):
        ov[j] = _cyclic_count_one(diag, xv[j])
    return out.reshape(np.shape(xs))


def cyclic_bisect(const double[::1] diag, double lo, double hi, double tol):
    cdef long k0 = _cyclic_count_one(diag, lo)
    cdef long k1 = _cyclic_count_one(diag, hi)
    out = np.empty(max(k1 - k0, 0))
    cdef double[::1] ov = out
    cdef long k
    cdef int it
    cdef double left, right, mid
    for k in range(k0, k1):
        left = lo
        right = hi
        for it in range(200):
            if right - left <= tol + 2.0 * EPS * max(fabs(left), fabs(right)):
                break
            mid = 0.5 * (left + right)
            if _cyclic_count_one(diag, mid) > k:
                right = mid
            else:
                left = mid
        ov[k - k0] = 0.5 * (left + right)
        # the next eigenvalue is at or above this one
        lo = left
    return out
