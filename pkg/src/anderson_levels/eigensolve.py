"""Symmetric eigensolvers written from scratch, plus closed-form oracles.

Full decompositions use Householder tridiagonalization followed by
implicit-shift QL. Periodic 1D chains additionally get an O(n) inertia
count, which is what the Monte Carlo estimators use when they only need
eigenvalue counts or the few eigenvalues inside a narrow window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .model import HamiltonianMatrix

DENSE_LIMIT = 4096
RESIDUAL_TOL = 1e-10
ORTHO_TOL = 1e-10
BISECT_TOL = 1e-13
SAFE_LOW = 2.0**-500
SAFE_HIGH = 2.0**500


class ConvergenceError(RuntimeError):
    pass


@dataclass
class SpectralSample:
    """Eigenvalues in ascending order with aligned orthonormal eigenvectors.

    ``eigenvectors[:, n]`` belongs to ``eigenvalues[n]``; it is ``None``
    when only eigenvalues were requested.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def gap_to_rest(self, n: int) -> float:
        ev = self.eigenvalues
        gaps = []
        if n > 0:
            gaps.append(ev[n] - ev[n - 1])
        if n < len(ev) - 1:
            gaps.append(ev[n + 1] - ev[n])
        return float(min(gaps)) if gaps else float("inf")


def symmetric_eigh(a, want_vectors: bool = True, max_sweeps: Optional[int] = None, context: str = ""):
    """Eigen-decomposition of a dense symmetric matrix.

    Returns ``(w, v)`` with ``w`` ascending; ``v`` is ``None`` when
    ``want_vectors`` is false. Raises :class:`ConvergenceError` after
    ``30 * n`` QL sweeps.
    """
    a = np.array(a, dtype=float, order="C", copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if want_vectors else None)
    # bring extreme norms into range by a power of two (exact), so the
    # relative deflation test cannot underflow or overflow
    anrm = float(np.max(np.abs(a)))
    shift = 0
    if 0.0 < anrm < SAFE_LOW or anrm > SAFE_HIGH:
        shift = -math.frexp(anrm)[1]
        a = np.ldexp(a, shift)
    diag, off, q = kernels.tridiagonalize(a, want_vectors)
    limit = 30 * n if max_sweeps is None else max_sweeps
    status = kernels.tql(diag, off, q, limit)
    if status < 0:
        raise ConvergenceError(f"QL did not converge within {limit} sweeps (n={n}) {context}".rstrip())
    # stable sort keeps QL output order for ties
    if shift:
        diag = np.ldexp(diag, -shift)
    order = np.argsort(diag, kind="stable")
    w = diag[order]
    v = q[:, order] if want_vectors else None
    return w, v


def eig_all(H: HamiltonianMatrix, want_vectors: bool = True, dense_limit: int = DENSE_LIMIT, meta=None) -> SpectralSample:
    if H.n > dense_limit:
        raise ValueError(f"n_sites={H.n} exceeds the dense eigensolver limit {dense_limit}")
    meta = dict(meta or {})
    meta.setdefault("d", H.cube.d)
    meta.setdefault("L", H.cube.L)
    context = "" if "seed" not in meta else f"(seed={meta['seed']}, realization_index={meta.get('realization_index')})"
    w, v = symmetric_eigh(H.dense(), want_vectors, context=context)
    return SpectralSample(w, v, meta)


def residual_check(H: HamiltonianMatrix, sample: SpectralSample) -> tuple:
    """Max scaled residual and max Gram deviation of a decomposition."""
    v = sample.eigenvectors
    res = H.dense() @ v - v * sample.eigenvalues[None, :]
    max_res = float(np.max(np.linalg.norm(res, axis=0))) / H.frobenius_norm()
    gram = float(np.max(np.abs(v.T @ v - np.eye(v.shape[1]))))
    return max_res, gram


def sturm_count(diag, offdiag, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` of an open tridiagonal matrix."""
    diag = np.ascontiguousarray(diag, dtype=float)
    off = np.zeros(diag.shape[0])
    offdiag = np.asarray(offdiag, dtype=float)
    if offdiag.shape[0] != max(diag.shape[0] - 1, 0):
        raise ValueError("offdiag must have length len(diag) - 1")
    off[: offdiag.shape[0]] = offdiag
    return int(kernels.sturm_count(diag, off, float(x)))


def is_periodic_chain(H: HamiltonianMatrix) -> bool:
    return H.cube.d == 1 and H.hopping == 1.0 and H.n >= 3


def count_below(H: HamiltonianMatrix, xs, eigenvalues=None) -> np.ndarray:
    """``#{eigenvalues < x}`` for every shift in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    if eigenvalues is not None:
        return np.searchsorted(eigenvalues, xs, side="left").astype(np.int64)
    if is_periodic_chain(H):
        return np.asarray(kernels.cyclic_count(np.ascontiguousarray(H.diagonal), xs), dtype=np.int64)
    w, _ = symmetric_eigh(H.dense(), want_vectors=False)
    return np.searchsorted(w, xs, side="left").astype(np.int64)


def count_in(H: HamiltonianMatrix, lo: float, hi: float, eigenvalues=None) -> int:
    """Eigenvalues in the closed interval ``[lo, hi]``."""
    if hi < lo:
        return 0
    c = count_below(H, [lo, np.nextafter(hi, np.inf)], eigenvalues)
    return int(c[1] - c[0])


def eigenvalues_in_window(H: HamiltonianMatrix, lo: float, hi: float, tol: float = BISECT_TOL) -> np.ndarray:
    """Ascending eigenvalues in ``[lo, hi]``, by bisection on periodic chains."""
    if hi < lo:
        return np.zeros(0)
    if is_periodic_chain(H):
        return np.asarray(
            kernels.cyclic_bisect(np.ascontiguousarray(H.diagonal), float(lo), float(np.nextafter(hi, np.inf)), tol)
        )
    w, _ = symmetric_eigh(H.dense(), want_vectors=False)
    return w[(w >= lo) & (w <= hi)]


@dataclass(frozen=True)
class DirichletSpectrum:
    n: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def dirichlet_spectrum(n: int) -> DirichletSpectrum:
    """Closed-form eigenpairs of the open chain: ``2 cos(k pi / (n+1))``, k = 1..n.

    Returned in ascending order (k descending); eigenvector columns are
    ``sin(k j pi / (n+1))`` normalized to unit length.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = np.arange(n, 0, -1)
    theta = k * np.pi / (n + 1)
    vals = 2.0 * np.cos(theta)
    j = np.arange(1, n + 1)
    vecs = np.sin(np.outer(j, theta))
    vecs /= np.linalg.norm(vecs, axis=0)[None, :]
    return DirichletSpectrum(n, vals, vecs)


def dirichlet_min_gap(n: int) -> float:
    """Smallest distance between two distinct Dirichlet eigenvalues.

    Adjacent values in sorted order realize the minimum, so this is
    exhaustive over pairs.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    vals = np.sort(2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    return float(np.min(np.diff(vals)))


def dirichlet_min_gap_bruteforce(n: int) -> float:
    vals = 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    diff = np.abs(vals[:, None] - vals[None, :])
    diff[np.diag_indices(n)] = np.inf
    return float(diff.min())


def calibrate_K1(n_max: int = 10**4) -> float:
    """Empirical constant: max over 2 <= n <= n_max of 1 / (n^2 min_gap(n))."""
    worst = 0.0
    for n in range(2, n_max + 1):
        worst = max(worst, 1.0 / (n * n * dirichlet_min_gap(n)))
    return worst
