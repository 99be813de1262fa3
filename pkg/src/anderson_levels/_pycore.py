"""Pure-Python/NumPy versions of the numerical kernels.

Used when the compiled ``_core`` extension is unavailable or when
``ANDERSON_LEVELS_BACKEND=python`` is set. Every function here has the same
signature and return convention as its counterpart in ``_core.pyx``.
"""

import math

import numpy as np

EPS = np.finfo(float).eps
SAFEMIN = np.finfo(float).tiny


def tridiagonalize(a, want_vectors):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    ``a`` is overwritten. Returns ``(diag, off, q)`` with
    ``q.T @ a_original @ q`` tridiagonal; ``q`` is ``None`` when
    ``want_vectors`` is false.
    """
    n = a.shape[0]
    q = np.eye(n) if want_vectors else None
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0.0 else norm
        v = x.copy()
        v[0] -= alpha
        vnorm = math.sqrt(float(v @ v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        sub = a[k + 1:, k + 1:]
        p = sub @ v
        w = p - float(v @ p) * v
        sub -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        if want_vectors:
            blk = q[:, k + 1:]
            blk -= 2.0 * np.outer(blk @ v, v)
    diag = np.diagonal(a).copy()
    off = np.zeros(n)
    if n > 1:
        off[:n - 1] = np.diagonal(a, 1)
    return diag, off, q


def tql(diag, off, z, max_iter):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``off[i]`` couples ``i`` and ``i + 1``; ``off[n - 1]`` is scratch.
    ``diag`` becomes the (unsorted) eigenvalues and the columns of ``z``
    (if given) are rotated into eigenvectors. Returns the number of QL
    sweeps used, or ``-1`` when ``max_iter`` sweeps were exhausted.
    """
    d = diag
    e = off
    n = d.shape[0]
    if n == 0:
        return 0
    e[n - 1] = 0.0
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd or abs(e[m]) < SAFEMIN:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_iter:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
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
                if z is not None:
                    zi = z[:, i].copy()
                    zi1 = z[:, i + 1]
                    z[:, i] = c * zi - s * zi1
                    z[:, i + 1] = s * zi + c * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return sweeps


def sturm_count(diag, off, x):
    """Number of eigenvalues strictly below ``x`` of an open tridiagonal.

    A vanishing pivot is replaced by ``+pivmin``, i.e. the shift is nudged
    down, so an eigenvalue equal to ``x`` is not counted.
    """
    n = diag.shape[0]
    pivmin = SAFEMIN * max(1.0, float(np.max(off[: n - 1] ** 2)) if n > 1 else 1.0)
    count = 0
    q = diag[0] - x
    if abs(q) < pivmin:
        q = pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if abs(q) < pivmin:
            q = pivmin
        if q < 0.0:
            count += 1
    return count


def cyclic_count(diag, xs):
    """Eigenvalue counts below each shift for the periodic unit-hop chain.

    The matrix has ``diag`` on the diagonal and unit entries at
    ``(i, i + 1)`` and at the corners ``(0, n - 1)``; ``n >= 3``. The
    count is the number of negative pivots of an LDL^T factorization of
    ``H - x`` (Sylvester inertia), vectorized over the shifts ``xs``.
    """
    xs = np.asarray(xs, dtype=float)
    n = diag.shape[0]
    pivmin = SAFEMIN
    count = np.zeros(xs.shape, dtype=np.int64)
    dlast = diag[n - 1] - xs
    c = np.ones(xs.shape)
    dnext = diag[0] - xs
    for i in range(n - 2):
        p = dnext
        p = np.where(np.abs(p) < pivmin, pivmin, p)
        count += p < 0.0
        inv = 1.0 / p
        dnext = diag[i + 1] - xs - inv
        dlast = dlast - c * c * inv
        c = (1.0 if i + 1 == n - 2 else 0.0) - c * inv
    p = np.where(np.abs(dnext) < pivmin, pivmin, dnext)
    count += p < 0.0
    p = dlast - c * c / p
    p = np.where(np.abs(p) < pivmin, pivmin, p)
    count += p < 0.0
    return count


def cyclic_bisect(diag, lo, hi, tol):
    """Eigenvalues in ``[lo, hi)`` of the periodic unit-hop chain by bisection."""
    bounds = cyclic_count(diag, np.array([lo, hi]))
    k = np.arange(bounds[0], bounds[1])
    if k.size == 0:
        return np.zeros(0)
    left = np.full(k.shape, float(lo))
    right = np.full(k.shape, float(hi))
    for _ in range(200):
        width = right - left
        if np.all(width <= tol + 2.0 * EPS * np.maximum(np.abs(left), np.abs(right))):
            break
        mid = 0.5 * (left + right)
        above = cyclic_count(diag, mid) > k
        right = np.where(above, mid, right)
        left = np.where(above, left, mid)
    return 0.5 * (left + right)
