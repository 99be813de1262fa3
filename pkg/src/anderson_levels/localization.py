"""Localization centers, box restriction, and first/second-order perturbation.

For a simple eigenvalue ``E_n`` of ``H = hop + diag(omega)`` with unit
eigenvector ``phi_n``:

* ``dE_n / d omega_g = phi_n(g)**2`` (so the gradient has unit l1 norm),
* ``d2E_n / d omega_g d omega_b = -2 sum_{m != n} phi_m(g) phi_n(g) phi_m(b) phi_n(b) / (E_m - E_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import eigensolve
from .eigensolve import SpectralSample, eig_all
from .model import (
    DisorderSpec,
    LatticeCube,
    assemble_hamiltonian,
    build_cube,
    hamiltonian_from_values,
    restrict_potential,
    sample_potential,
)

SIMPLICITY_GAP = 1e-10
AMPLITUDE_FLOOR = 1e-14
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-3


class DegenerateEigenvalueError(ValueError):
    def __init__(self, n, gap):
        self.n = n
        self.gap = gap
        super().__init__(f"eigenvalue {n} is not simple (gap to rest {gap:.3e}); perturbation formulas do not apply")


class InequalityViolation(ArithmeticError):
    pass


def _cube_of(sample: SpectralSample, cube: Optional[LatticeCube]) -> LatticeCube:
    if cube is not None:
        return cube
    return build_cube(sample.meta["d"], sample.meta["L"])


def _require_simple(sample: SpectralSample, n: int, threshold=SIMPLICITY_GAP) -> float:
    gap = sample.gap_to_rest(n)
    if not gap > threshold:
        raise DegenerateEigenvalueError(n, gap)
    return gap


# ---------------------------------------------------------------------------
# localization centers


@dataclass
class LocalizationRecord:
    index: int
    eigenvalue: float
    center: tuple
    center_flat: int
    decay_rate: float
    prefactor_exponent: float
    max_violation: float


def localization_center(phi, cube: LatticeCube) -> int:
    """Flat index maximizing ``|phi|``; exact ties go to the lexicographically smallest site."""
    amp = np.abs(np.asarray(phi))
    # flat order is lexicographic and argmax returns the first maximum
    return int(np.argmax(amp))


def fit_decay(phi, cube: LatticeCube, center_flat: int, floor: float = AMPLITUDE_FLOOR) -> tuple:
    """Least-squares fit ``log|phi(x)| ~ c - rate * |x - center|``.

    Returns ``(rate, q, max_violation)`` where ``q = c / log L`` and the
    violation is the largest positive residual. With no usable site other
    than the center, the rate is limited by the floor at unit distance.
    """
    amp = np.abs(np.asarray(phi, dtype=float))
    dist = cube.periodic_distance(cube.coords[center_flat])
    mask = amp > floor
    r = dist[mask]
    y = np.log(amp[mask])
    logL = math.log(cube.L) if cube.L > 1 else float("nan")
    if np.unique(r).size < 2:
        rate = -math.log(floor)
        c = float(y.max()) if y.size else 0.0
        return rate, c / logL, 0.0
    A = np.stack([np.ones_like(r), -r], axis=1)
    (c, rate), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (c - rate * r)
    return max(float(rate), 0.0), float(c) / logL, max(float(resid.max()), 0.0)


def localization_centers(sample: SpectralSample, cube: Optional[LatticeCube] = None, indices=None) -> list:
    if sample.eigenvectors is None:
        raise ValueError("localization centers need eigenvectors")
    cube = _cube_of(sample, cube)
    idx = range(len(sample)) if indices is None else indices
    out = []
    for n in idx:
        phi = sample.eigenvectors[:, n]
        c = localization_center(phi, cube)
        rate, q, viol = fit_decay(phi, cube, c)
        out.append(LocalizationRecord(int(n), float(sample.eigenvalues[n]), cube.multi_index(c), c, rate, q, viol))
    return out


def median_decay_rate(records, window) -> float:
    lo, hi = window
    rates = [r.decay_rate for r in records if lo <= r.eigenvalue <= hi]
    return float(np.median(rates)) if rates else float("nan")


# ---------------------------------------------------------------------------
# box restriction


def _inside_box(center, shift, half_side) -> bool:
    return bool(np.all(np.abs(np.asarray(center) - np.asarray(shift)) <= half_side))


@lru_cache(maxsize=2)
def _big_box(spec: DisorderSpec, d: int, L: int, realization_index: int):
    big = build_cube(d, L)
    pot = sample_potential(big, spec, realization_index)
    sample = eig_all(assemble_hamiltonian(big, pot), meta={"seed": spec.base_seed, "realization_index": realization_index})
    return big, sample


def box_matching(spec: DisorderSpec, d: int, L: int, ell: int, epsilon: float, window, realization_index: int = 0, shift=None) -> dict:
    """Match eigenvalues of the big periodic box against a coupled sub-box.

    Eigenvalues of ``H(Lambda_L)`` in ``window`` whose localization center
    lies in ``shift + Lambda_ell`` are paired with the nearest eigenvalue of
    ``H(shift + Lambda_ell')``, ``ell' = round(ell (1 + epsilon))``, built
    from the same site potentials.
    """
    shift = np.zeros(d, dtype=np.int64) if shift is None else np.asarray(shift, dtype=np.int64)
    ell_outer = int(round(ell * (1.0 + epsilon)))
    if ell_outer > L or np.any(np.abs(shift) + ell_outer > L):
        raise ValueError(f"sub-box shift+Lambda_{ell_outer} does not fit inside Lambda_{L}")
    lo, hi = window
    big, sample = _big_box(spec, d, L, realization_index)
    sel = np.nonzero((sample.eigenvalues >= lo) & (sample.eigenvalues <= hi))[0]
    records = localization_centers(sample, big, sel)
    inner = [rec for rec in records if _inside_box(rec.center, shift, ell)]
    small = build_cube(d, ell_outer)
    small_pot = restrict_potential(spec, realization_index, small, shift)
    small_vals, _ = eigensolve.symmetric_eigh(hamiltonian_from_values(small, small_pot.values).dense(), want_vectors=False)
    distances = []
    for rec in inner:
        j = np.searchsorted(small_vals, rec.eigenvalue)
        cand = small_vals[max(j - 1, 0) : j + 1]
        distances.append(float(np.min(np.abs(cand - rec.eigenvalue))) if cand.size else float("inf"))
    rate = median_decay_rate(records, window)
    return {
        "L": L,
        "ell": ell,
        "ell_outer": ell_outer,
        "epsilon": epsilon,
        "window": [lo, hi],
        "realization_index": realization_index,
        "matched": len(inner),
        "eigenvalues": [rec.eigenvalue for rec in inner],
        "distances": distances,
        "max_distance": max(distances) if distances else None,
        "decay_rate": rate,
        "reference_scale": math.exp(-rate * epsilon * ell / 4.0) if np.isfinite(rate) else None,
    }


# ---------------------------------------------------------------------------
# perturbation theory


@dataclass
class GradientRecord:
    index: int
    eigenvalue: float
    gradient: np.ndarray
    gap_to_rest: float


def eigen_gradient(sample: SpectralSample, n: int) -> GradientRecord:
    gap = _require_simple(sample, n)
    grad = sample.eigenvectors[:, n] ** 2
    return GradientRecord(int(n), float(sample.eigenvalues[n]), grad, gap)


def eigen_hessian(sample: SpectralSample, n: int) -> np.ndarray:
    _require_simple(sample, n)
    phi = sample.eigenvectors
    w = sample.eigenvalues
    others = np.arange(len(w)) != n
    # rows: m != n, columns: sites g; entries phi_m(g) phi_n(g)
    prod = phi[:, others].T * phi[:, n][None, :]
    weights = 1.0 / (w[others] - w[n])
    hess = -2.0 * (prod.T * weights[None, :]) @ prod
    # symmetric by construction up to rounding in the matmul; make it exact
    return 0.5 * (hess + hess.T)


def hessian_pairing_bound(sample: SpectralSample, n: int, patterns_a, patterns_b, hessian=None) -> dict:
    """Check ``|<Hess a, b>| <= 2 ||a||_inf ||b||_inf / gap`` for each pattern pair."""
    gap = _require_simple(sample, n)
    hess = eigen_hessian(sample, n) if hessian is None else hessian
    a = np.atleast_2d(np.asarray(patterns_a, dtype=float))
    b = np.atleast_2d(np.asarray(patterns_b, dtype=float))
    pairing = np.einsum("pi,ij,pj->p", b, hess, a)
    scale = np.max(np.abs(a), axis=1) * np.max(np.abs(b), axis=1)
    bound = 2.0 * scale / gap
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, np.abs(pairing) / np.where(bound > 0, bound, 1.0), 0.0)
    return {
        "index": int(n),
        "gap": gap,
        "pairings": pairing,
        "bounds": bound,
        "max_ratio": float(ratio.max()) if ratio.size else 0.0,
        "holds": bool(np.all(np.abs(pairing) <= bound)),
    }


def jacobian_2x2(grad_e: GradientRecord, grad_e_prime: GradientRecord, site: int, site_prime: int) -> float:
    if site == site_prime:
        raise ValueError("the two sites must differ")
    u = grad_e.gradient
    v = grad_e_prime.gradient
    return float(u[site] * v[site_prime] - u[site_prime] * v[site])


def max_minor_sq(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = np.outer(u, v)
    minors = m - m.T
    return float(np.max(minors**2))


def minor_lower_bound(u, v, check: bool = True) -> tuple:
    """``(max_{j != k} (u_j v_k - u_k v_j)^2, ||u - v||_1^2 / (4 n^5))``.

    Raises :class:`InequalityViolation` if the first is below the second.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = u.shape[0]
    if v.shape != u.shape or n < 2:
        raise ValueError("u and v must be equal-length vectors with n >= 2")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("components must be nonnegative")
    if abs(u.sum() - 1.0) > 1e-12 or abs(v.sum() - 1.0) > 1e-12:
        raise ValueError("u and v must have unit l1 norm")
    lhs = max_minor_sq(u, v)
    rhs = float(np.abs(u - v).sum() ** 2 / (4.0 * n**5))
    if check and lhs < rhs:
        raise InequalityViolation(f"max minor^2 {lhs:.6e} < {rhs:.6e}")
    return lhs, rhs


def minor_sum_identity(u, v) -> tuple:
    """Both sides of ``sum_{j,k} minor_jk^2 = 2 |v|^2 |v_perp|^2`` (``u = a v + v_perp``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = np.outer(u, v)
    total = float(np.sum((m - m.T) ** 2))
    vv = float(v @ v)
    v_perp = u - (float(u @ v) / vv) * v
    return total, 2.0 * vv * float(v_perp @ v_perp)


def gradient_separation_check(sample: SpectralSample, j: int, k: int, potential, K: float, d: int, slack: float = 1e-12) -> dict:
    """Lower bounds on the separation of two eigenvalue gradients.

    (i)  ``|omega . grad(E_j - E_k)| >= |E_j - E_k| - 2d``
    (ii) ``||grad(E_j - E_k)||_2 >= (|E_j - E_k| - 2d) / (K sqrt(N))``

    Both are only asserted when ``|E_j - E_k| > 2d``. The report also
    carries (i) with ``4d`` (the full range of the hopping quadratic form)
    and the l1 norm of the gradient difference.
    """
    _require_simple(sample, j)
    _require_simple(sample, k)
    omega = np.asarray(getattr(potential, "values", potential), dtype=float)
    gj = sample.eigenvectors[:, j] ** 2
    gk = sample.eigenvectors[:, k] ** 2
    diff = gj - gk
    gap = abs(float(sample.eigenvalues[j] - sample.eigenvalues[k]))
    N = omega.shape[0]
    lhs_i = abs(float(omega @ diff))
    lhs_ii = float(np.linalg.norm(diff))
    out = {
        "j": int(j),
        "k": int(k),
        "gap": gap,
        "l1_gradient_difference": float(np.abs(diff).sum()),
        "projection": lhs_i,
        "l2_gradient_difference": lhs_ii,
        "skipped": not gap > 2 * d,
    }
    if out["skipped"]:
        out.update({"holds_i": None, "holds_ii": None})
    else:
        rhs_i = gap - 2 * d
        rhs_ii = rhs_i / (K * math.sqrt(N))
        out.update(
            {
                "rhs_i": rhs_i,
                "rhs_ii": rhs_ii,
                "holds_i": lhs_i >= rhs_i - slack,
                "holds_ii": lhs_ii >= rhs_ii - slack,
            }
        )
    out["holds_i_full_range"] = None if not gap > 4 * d else lhs_i >= gap - 4 * d - slack
    return out


def gradient_separation_batch(sample: SpectralSample, potential, K: float, d: int, slack: float = 1e-12) -> dict:
    """Run :func:`gradient_separation_check` over every pair of simple eigenvalues.

    Returns violation counts plus the l1 norms of all gradient differences.
    """
    w = sample.eigenvalues
    omega = np.asarray(getattr(potential, "values", potential), dtype=float)
    N = omega.shape[0]
    gaps = np.diff(w)
    simple = np.ones(N, dtype=bool)
    simple[:-1] &= gaps > SIMPLICITY_GAP
    simple[1:] &= gaps > SIMPLICITY_GAP
    grads = sample.eigenvectors**2
    proj = omega @ grads
    out = {"pairs": 0, "checked": 0, "violations_i": 0, "violations_ii": 0, "violations_i_full_range": 0, "checked_full_range": 0, "worst_shortfall_i": 0.0, "worst_shortfall_ii": 0.0}
    l1 = []
    for j in range(1, N):
        if not simple[j]:
            continue
        ks = np.nonzero(simple[:j])[0]
        diff = grads[:, ks] - grads[:, j : j + 1]
        gap = w[j] - w[ks]
        l1.append(np.abs(diff).sum(axis=0))
        out["pairs"] += ks.size
        hyp = gap > 2 * d
        if np.any(hyp):
            lhs_i = np.abs(proj[j] - proj[ks])[hyp]
            lhs_ii = np.linalg.norm(diff[:, hyp], axis=0)
            rhs_i = gap[hyp] - 2 * d
            rhs_ii = rhs_i / (K * math.sqrt(N))
            out["checked"] += int(hyp.sum())
            out["violations_i"] += int(np.sum(lhs_i < rhs_i - slack))
            out["violations_ii"] += int(np.sum(lhs_ii < rhs_ii - slack))
            out["worst_shortfall_i"] = max(out["worst_shortfall_i"], float(np.max(rhs_i - lhs_i)))
            out["worst_shortfall_ii"] = max(out["worst_shortfall_ii"], float(np.max(rhs_ii - lhs_ii)))
        full = gap > 4 * d
        if np.any(full):
            lhs = np.abs(proj[j] - proj[ks])[full]
            out["checked_full_range"] += int(full.sum())
            out["violations_i_full_range"] += int(np.sum(lhs < gap[full] - 4 * d - slack))
    out["l1_gradient_differences"] = np.concatenate(l1) if l1 else np.zeros(0)
    return out


# ---------------------------------------------------------------------------
# finite-difference oracles


def eigenvalue_at(cube: LatticeCube, values, n: int) -> float:
    w, _ = eigensolve.symmetric_eigh(hamiltonian_from_values(cube, values).dense(), want_vectors=False)
    return float(w[n])


def fd_gradient(cube: LatticeCube, values, n: int, site: int, step: float = FD_STEP_FIRST) -> float:
    values = np.array(values, dtype=float)
    up = values.copy()
    dn = values.copy()
    up[site] += step
    dn[site] -= step
    return (eigenvalue_at(cube, up, n) - eigenvalue_at(cube, dn, n)) / (2.0 * step)


def fd_hessian_diagonal(cube: LatticeCube, values, n: int, site: int, step: float = FD_STEP_SECOND) -> float:
    values = np.array(values, dtype=float)
    up = values.copy()
    dn = values.copy()
    up[site] += step
    dn[site] -= step
    e0 = eigenvalue_at(cube, values, n)
    return (eigenvalue_at(cube, up, n) - 2.0 * e0 + eigenvalue_at(cube, dn, n)) / step**2
