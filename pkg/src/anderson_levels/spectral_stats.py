"""Density of states, rescaled level processes and Monte Carlo estimators.

Every estimator draws realizations ``0 .. R-1`` of the potential from a
:class:`~anderson_levels.model.DisorderSpec`, computes a small per-realization
record (window counts or a handful of eigenvalues) and reduces the records
in realization order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import eigensolve
from .model import DisorderSpec, assemble_hamiltonian, build_cube, sample_potential
from .parallel import map_realizations


class HypothesisError(ValueError):
    """An experiment was requested where its mathematical hypothesis fails."""


@dataclass
class EstimatorReport:
    experiment: str
    parameters: dict
    estimates: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    realizations: int = 0
    rows: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "realizations": self.realizations,
            "estimates": self.estimates,
            "standard_errors": self.standard_errors,
            "ratios": self.ratios,
            "statistics": self.statistics,
            "flags": self.flags,
        }


def mean_and_se(x) -> tuple:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    if x.size == 1:
        return float(x[0]), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# per-realization workers (module level so they pickle)


@lru_cache(maxsize=32)
def _cube(d, L):
    return build_cube(d, L)


def _counts_below(d, L, spec, xs, r):
    cube = _cube(d, L)
    H = assemble_hamiltonian(cube, sample_potential(cube, spec, r))
    return eigensolve.count_below(H, xs)


def _levels_near(d, L, spec, windows, r):
    cube = _cube(d, L)
    H = assemble_hamiltonian(cube, sample_potential(cube, spec, r))
    return [eigensolve.eigenvalues_in_window(H, lo, hi) for lo, hi in windows]


def counts_below(d, L, spec: DisorderSpec, xs, R: int, workers=None) -> np.ndarray:
    """``#{E_n < x}`` for each shift, one row per realization."""
    xs = np.asarray(xs, dtype=float)
    rows = map_realizations(partial(_counts_below, d, L, spec, xs), range(R), workers, spec.base_seed)
    return np.array(rows, dtype=np.int64).reshape(R, xs.size)


def window_counts(d, L, spec: DisorderSpec, windows, R: int, workers=None) -> np.ndarray:
    """Eigenvalue counts in closed windows ``[lo, hi]``; shape ``(R, len(windows))``."""
    windows = [(float(lo), float(hi)) for lo, hi in windows]
    xs = []
    for lo, hi in windows:
        xs.extend([lo, np.nextafter(hi, np.inf)])
    below = counts_below(d, L, spec, xs, R, workers)
    counts = below[:, 1::2] - below[:, 0::2]
    for j, (lo, hi) in enumerate(windows):
        if hi < lo:
            counts[:, j] = 0
    return counts


def levels_near(d, L, spec: DisorderSpec, windows, R: int, workers=None) -> list:
    """Eigenvalues inside each energy window, per realization."""
    windows = [(float(lo), float(hi)) for lo, hi in windows]
    return map_realizations(partial(_levels_near, d, L, spec, windows), range(R), workers, spec.base_seed)


# ---------------------------------------------------------------------------
# density of states


@dataclass
class DosEstimate:
    grid: np.ndarray
    nu_hat: np.ndarray
    N_hat: np.ndarray
    h: float
    realizations_used: int
    volume: int
    nu_se: Optional[np.ndarray] = None
    bandwidth_warning: bool = False

    def nu_at(self, E: float) -> float:
        return float(np.interp(E, self.grid, self.nu_hat))

    def total_mass(self) -> float:
        return float(np.trapezoid(self.nu_hat, self.grid))


def estimate_dos(d, L, spec: DisorderSpec, R: int, grid, h: float, workers=None) -> DosEstimate:
    """Box-kernel estimate of the density of states and the IDS on ``grid``.

    ``nu_hat(E)`` is the mean number of eigenvalues in ``[E - h, E + h]``
    divided by ``2 h |Lambda|``; ``N_hat(E)`` the mean number below ``E``
    divided by ``|Lambda|``.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    vol = build_cube(d, L).n_sites
    xs = np.concatenate([grid - h, np.nextafter(grid + h, np.inf), grid])
    below = counts_below(d, L, spec, xs, R, workers).astype(float)
    g = grid.size
    in_window = below[:, g : 2 * g] - below[:, :g]
    nu_rows = in_window / (2.0 * h * vol)
    nu_hat = nu_rows.mean(axis=0)
    nu_se = nu_rows.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(g, np.nan)
    N_hat = below[:, 2 * g :].mean(axis=0) / vol
    peak = float(nu_hat.max()) if nu_hat.size else 0.0
    mean_spacing = 1.0 / (peak * vol) if peak > 0 else float("inf")
    warn = bool(h < 2.0 * mean_spacing)
    if warn:
        warnings.warn(f"DOS bandwidth h={h} is below twice the mean level spacing {mean_spacing:.3g}")
    return DosEstimate(grid, nu_hat, N_hat, float(h), int(R), vol, nu_se, warn)


def estimate_nu(d, L, spec: DisorderSpec, E: float, R: int, h: float = 0.05, workers=None) -> tuple:
    """``(nu_hat(E), standard error)`` from the box-kernel estimator."""
    vol = build_cube(d, L).n_sites
    counts = window_counts(d, L, spec, [(E - h, E + h)], R, workers)[:, 0]
    return mean_and_se(counts / (2.0 * h * vol))


# ---------------------------------------------------------------------------
# local level statistics


@dataclass
class PointProcessSample:
    E: float
    nu_at_E: float
    volume: int
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def count_in(self, lo: float, hi: float) -> int:
        return int(np.count_nonzero((self.points >= lo) & (self.points <= hi)))


def rescale_levels(sample, E: float, nu_at_E: float, volume: Optional[int] = None, meta=None) -> PointProcessSample:
    """``xi_n = |Lambda| nu(E) (E_n - E)``.

    ``sample`` is a :class:`SpectralSample` or a sorted array of
    eigenvalues (in which case ``volume`` is required).
    """
    if not nu_at_E > 0:
        raise HypothesisError(f"rescaling needs nu(E) > 0, got {nu_at_E}")
    if isinstance(sample, eigensolve.SpectralSample):
        levels = sample.eigenvalues
        volume = len(levels) if volume is None else volume
        meta = {**sample.meta, **(meta or {})}
    else:
        levels = np.asarray(sample, dtype=float)
        if volume is None:
            raise ValueError("volume is required when passing raw eigenvalues")
    points = volume * nu_at_E * (levels - E)
    return PointProcessSample(float(E), float(nu_at_E), int(volume), points, dict(meta or {}))


def poisson_pmf(k, lam):
    k = np.asarray(k)
    return stats.poisson.pmf(k, lam)


def total_variation_poisson(counts, lam: float) -> float:
    """TV distance between the empirical law of ``counts`` and Poisson(lam)."""
    counts = np.asarray(counts, dtype=np.int64)
    kmax = int(counts.max()) if counts.size else 0
    emp = np.bincount(counts, minlength=kmax + 1) / counts.size
    pmf = poisson_pmf(np.arange(kmax + 1), lam)
    tail = max(0.0, 1.0 - float(pmf.sum()))
    return 0.5 * (float(np.abs(emp - pmf).sum()) + tail)


def _merge_tail(observed, expected, min_expected=5.0):
    """Merge rightmost then leftmost bins until every expected count is >= min_expected."""
    obs = list(observed)
    exp = list(expected)
    while len(exp) > 1 and exp[-1] < min_expected:
        e, o = exp.pop(), obs.pop()
        exp[-1] += e
        obs[-1] += o
    while len(exp) > 1 and exp[0] < min_expected:
        e, o = exp.pop(0), obs.pop(0)
        exp[0] += e
        obs[0] += o
    return np.array(obs, dtype=float), np.array(exp, dtype=float)


def chi_square_poisson(counts, lam: float) -> tuple:
    """Pearson chi-square of counts against Poisson(lam); returns (stat, dof, p)."""
    counts = np.asarray(counts, dtype=np.int64)
    R = counts.size
    kmax = max(int(counts.max()), int(math.ceil(lam + 6 * math.sqrt(lam) + 6)))
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = R * poisson_pmf(np.arange(kmax + 1), lam)
    exp[-1] += R * stats.poisson.sf(kmax, lam)
    obs, exp = _merge_tail(obs, exp)
    dof = len(exp) - 1
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    p = float(stats.chi2.sf(chi2, dof)) if dof > 0 else float("nan")
    return chi2, dof, p


def ks_exponential(samples) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and Exp(1)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        return float("nan")
    cdf = -np.expm1(-np.maximum(x, 0.0))
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def pooled_spacings(samples: Sequence[PointProcessSample], window) -> np.ndarray:
    lo, hi = window
    out = []
    for s in samples:
        pts = s.points[(s.points >= lo) & (s.points <= hi)]
        if pts.size > 1:
            out.append(np.diff(np.sort(pts)))
    return np.concatenate(out) if out else np.zeros(0)


def poisson_gof(samples: Sequence[PointProcessSample], windows, spacing_window=(-10.0, 10.0), min_realizations=100) -> EstimatorReport:
    """Compare window counts with Poisson(|U|) and spacings with Exp(1)."""
    windows = [(float(lo), float(hi)) for lo, hi in windows]
    for lo, hi in windows:
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"window [{lo}, {hi}] must be bounded and non-empty")
    ordered = sorted(windows)
    for (_, h1), (l2, _) in zip(ordered, ordered[1:]):
        if l2 < h1:
            raise ValueError("windows must be pairwise disjoint")
    if samples:
        ref = (samples[0].E, samples[0].nu_at_E)
        if any((s.E, s.nu_at_E) != ref for s in samples):
            raise ValueError("all samples must share the reference energy and nu(E)")
    R = len(samples)
    report = EstimatorReport(
        "poisson",
        {"windows": [list(w) for w in windows], "spacing_window": list(spacing_window)},
        realizations=R,
    )
    report.flags["low_power"] = R < min_realizations
    per_window = []
    for lo, hi in windows:
        counts = np.array([s.count_in(lo, hi) for s in samples], dtype=np.int64)
        lam = hi - lo
        chi2, dof, p = chi_square_poisson(counts, lam) if R else (float("nan"), 0, float("nan"))
        m, se = mean_and_se(counts)
        per_window.append(
            {
                "window": [lo, hi],
                "poisson_mean": lam,
                "mean_count": m,
                "mean_count_se": se,
                "tv_distance": total_variation_poisson(counts, lam) if R else float("nan"),
                "chi_square": chi2,
                "chi_square_dof": dof,
                "chi_square_p": p,
            }
        )
    report.statistics["windows"] = per_window
    spacings = pooled_spacings(samples, spacing_window)
    report.statistics["spacings"] = {
        "n": int(spacings.size),
        "mean": float(spacings.mean()) if spacings.size else float("nan"),
        "ks_distance": ks_exponential(spacings),
    }
    return report


def laplace_gap(counts_a, counts_b, t: float, t_prime: float) -> float:
    """Empirical joint Laplace functional minus the product of the marginals."""
    a = np.exp(-t * np.asarray(counts_a, dtype=float))
    b = np.exp(-t_prime * np.asarray(counts_b, dtype=float))
    return float(np.mean(a * b) - np.mean(a) * np.mean(b))


def pearson(x, y) -> Optional[float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx = x.std()
    sy = y.std()
    if sx == 0 or sy == 0:
        return None
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def _capped_categories(x, cap):
    return np.minimum(np.asarray(x, dtype=np.int64), cap)


def chi_square_independence(x, y, min_expected=5.0) -> tuple:
    """Pearson chi-square on the joint count table, tails merged for expected >= min_expected."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    R = x.size
    cx, cy = int(x.max()), int(y.max())
    while True:
        xc = _capped_categories(x, cx)
        yc = _capped_categories(y, cy)
        table = np.zeros((cx + 1, cy + 1))
        np.add.at(table, (xc, yc), 1.0)
        exp = np.outer(table.sum(axis=1), table.sum(axis=0)) / R
        if exp.min() >= min_expected or (cx == 0 and cy == 0):
            break
        # shrink whichever variable owns the sparsest marginal category
        rx = table.sum(axis=1)[-1] if cx > 0 else np.inf
        ry = table.sum(axis=0)[-1] if cy > 0 else np.inf
        if rx <= ry:
            cx -= 1
        else:
            cy -= 1
    keep_r = table.sum(axis=1) > 0
    keep_c = table.sum(axis=0) > 0
    table = table[keep_r][:, keep_c]
    exp = exp[keep_r][:, keep_c]
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    if dof == 0:
        return float("nan"), 0, float("nan"), table
    chi2 = float(np.sum((table - exp) ** 2 / exp))
    return chi2, dof, float(stats.chi2.sf(chi2, dof)), table


def independence_test(counts_E, counts_E_prime, probes=(0.5, 1.0, 2.0)) -> EstimatorReport:
    """Correlation, chi-square and Laplace-functional factorization of joint counts.

    ``counts_E[r]`` and ``counts_E_prime[r]`` must come from the same
    realization ``r``.
    """
    a = np.asarray(counts_E, dtype=np.int64)
    b = np.asarray(counts_E_prime, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("joint ensemble must pair counts realization by realization")
    R = a.size
    report = EstimatorReport("independence", {"probes": list(probes)}, realizations=R)
    rho = pearson(a, b)
    report.statistics["pearson"] = rho
    report.flags["correlation_undefined"] = rho is None
    report.flags["low_power"] = R < 300
    chi2, dof, p, _ = chi_square_independence(a, b) if R else (float("nan"), 0, float("nan"), None)
    report.statistics["chi_square"] = {"statistic": chi2, "dof": dof, "p_value": p}
    gaps = []
    for t in probes:
        for tp in probes:
            gaps.append({"t": float(t), "t_prime": float(tp), "gap": laplace_gap(a, b, t, tp)})
    report.statistics["laplace_gaps"] = gaps
    report.statistics["max_abs_laplace_gap"] = max((abs(g["gap"]) for g in gaps), default=0.0)
    ma, sa = mean_and_se(a)
    mb, sb = mean_and_se(b)
    report.estimates.update({"mean_count_E": ma, "mean_count_E_prime": mb})
    report.standard_errors.update({"mean_count_E": sa, "mean_count_E_prime": sb})
    return report


# ---------------------------------------------------------------------------
# Wegner / Minami / decorrelation


def _interval(J):
    lo, hi = (float(J[0]), float(J[1]))
    return lo, hi, max(hi - lo, 0.0)


def wegner_from_counts(counts, J, volume, density_max=None, parameters=None) -> EstimatorReport:
    lo, hi, width = _interval(J)
    counts = np.asarray(counts, dtype=float)
    report = EstimatorReport("wegner", dict(parameters or {}, J=[lo, hi]), realizations=counts.size)
    m, se = mean_and_se(counts)
    report.estimates["mean_count"] = m
    report.standard_errors["mean_count"] = se
    scale = width * volume
    report.ratios["per_width_volume"] = m / scale if scale > 0 else None
    report.ratios["per_width_volume_se"] = se / scale if scale > 0 else None
    if density_max is not None:
        report.ratios["bound_constant"] = density_max
    report.flags["low_power"] = counts.size < 100
    return report


def minami_from_counts(counts_J, counts_K, J, K, volume, density_max=None, parameters=None) -> EstimatorReport:
    jlo, jhi, jw = _interval(J)
    klo, khi, kw = _interval(K)
    cj = np.asarray(counts_J, dtype=float)
    ck = np.asarray(counts_K, dtype=float)
    products = cj * (ck - 1.0)
    # tr 1_J (tr 1_K - 1) is 0 when tr 1_J = 0, whatever tr 1_K is
    products[cj == 0] = 0.0
    report = EstimatorReport("minami", dict(parameters or {}, J=[jlo, jhi], K=[klo, khi]), realizations=cj.size)
    m, se = mean_and_se(products)
    report.estimates["second_factorial_moment"] = m
    report.standard_errors["second_factorial_moment"] = se
    scale = jw * kw * volume**2
    report.ratios["per_widths_volume_sq"] = m / scale if scale > 0 else None
    report.ratios["per_widths_volume_sq_se"] = se / scale if scale > 0 else None
    if density_max is not None:
        report.ratios["bound_constant"] = math.pi**2 * density_max**2
    report.flags["low_power"] = cj.size < 1000
    return report


def wegner_estimator(d, L, spec: DisorderSpec, J, R: int, workers=None) -> EstimatorReport:
    vol = build_cube(d, L).n_sites
    counts = window_counts(d, L, spec, [J], R, workers)[:, 0]
    return wegner_from_counts(counts, J, vol, spec.density_max, {"d": d, "L": L, "seed": spec.base_seed})


def minami_estimator(d, L, spec: DisorderSpec, J, K, R: int, workers=None) -> EstimatorReport:
    if not (K[0] <= J[0] and J[1] <= K[1]):
        raise ValueError(f"J={list(J)} is not contained in K={list(K)}")
    vol = build_cube(d, L).n_sites
    counts = window_counts(d, L, spec, [J, K], R, workers)
    return minami_from_counts(counts[:, 0], counts[:, 1], J, K, vol, spec.density_max, {"d": d, "L": L, "seed": spec.base_seed})


def inner_scale(L: int, alpha: float) -> int:
    return int(round(L**alpha))


def _ratio_with_se(p, se, scale):
    if scale == 0:
        return None, None
    return p / scale, se / scale


def decorrelation_from_hits(hits_E, hits_E_prime, d, L, ell, parameters=None) -> EstimatorReport:
    a = np.asarray(hits_E, dtype=bool)
    b = np.asarray(hits_E_prime, dtype=bool)
    R = a.size
    both = a & b
    report = EstimatorReport("decorrelation", dict(parameters or {}), realizations=R)
    est = {}
    ses = {}
    for name, ev in (("P_both", both), ("P_E", a), ("P_E_prime", b)):
        p = float(ev.mean()) if R else float("nan")
        est[name] = p
        ses[name] = math.sqrt(p * (1 - p) / R) if R else float("nan")
        est[name.replace("P_", "hits_")] = int(ev.sum())
    report.estimates.update(est)
    report.standard_errors.update({k: v for k, v in ses.items()})
    scale = ell / L
    pb, sb = est["P_both"], ses["P_both"]
    r1, r1se = _ratio_with_se(pb, sb, scale**d)
    r2, r2se = _ratio_with_se(pb, sb, scale ** (2 * d))
    report.ratios["P_both_over_scale_d"] = r1
    report.ratios["P_both_over_scale_d_se"] = r1se
    report.ratios["P_both_over_scale_2d"] = r2
    report.ratios["P_both_over_scale_2d_se"] = r2se
    denom = est["P_E"] * est["P_E_prime"]
    if denom > 0:
        rel = math.sqrt(sum((s / p) ** 2 for s, p in ((sb, pb), (ses["P_E"], est["P_E"]), (ses["P_E_prime"], est["P_E_prime"])) if p > 0))
        ratio = pb / denom
        report.ratios["P_both_over_product"] = ratio
        report.ratios["P_both_over_product_se"] = ratio * rel
        report.flags["product_ratio_undefined"] = False
    else:
        report.ratios["P_both_over_product"] = None
        report.ratios["P_both_over_product_se"] = None
        report.flags["product_ratio_undefined"] = True
    return report


def decorrelation_estimator(d, L, alpha, E, E_prime, spec: DisorderSpec, R: int, workers=None) -> EstimatorReport:
    """Joint hit probability of two windows of width ``2 L^-d`` by the small box.

    Eigenvalues come from ``H(Lambda_ell)`` with ``ell = round(L**alpha)``;
    the windows ``E + L^-d (-1, 1)`` are set by the large scale ``L``.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    ell = inner_scale(L, alpha)
    if ell < 3:
        raise ValueError(f"inner scale round(L^alpha) = {ell} < 3")
    half = float(L) ** (-d)
    counts = window_counts(d, ell, spec, [(E - half, E + half), (E_prime - half, E_prime + half)], R, workers)
    params = {
        "d": d,
        "L": L,
        "ell": ell,
        "alpha": alpha,
        "E": E,
        "E_prime": E_prime,
        "seed": spec.base_seed,
        "one_dimensional": d == 1,
        "energies_far_apart": abs(E - E_prime) > 2 * d,
    }
    report = decorrelation_from_hits(counts[:, 0] > 0, counts[:, 1] > 0, d, L, ell, params)
    report.rows = counts
    return report


def decreasing_within_se(values, ses, k: float = 2.0) -> bool:
    """True when no step increases by more than ``k`` combined standard errors."""
    for (v0, s0), (v1, s1) in zip(zip(values, ses), zip(values[1:], ses[1:])):
        if v1 - v0 > k * math.hypot(s0, s1):
            return False
    return True
