"""Experiment bodies.

Each function takes a validated :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`; nothing here touches the file system. Every
random choice is keyed by (seed, realization_index), so results do not
depend on the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .. import eigensolve, localization, spectral_stats
from ..eigensolve import eig_all
from ..model import DisorderSpec, assemble_hamiltonian, build_cube, open_chain, sample_potential
from ..parallel import map_realizations
from ..rng import derive_seed
from ..spectral_stats import HypothesisError
from .config import ExperimentConfig

FD_GRADIENT_TOL = 1e-4
FD_HESSIAN_TOL = 1e-3
GRADIENT_SUM_TOL = 1e-10
# FD picks avoid near-degenerate levels and tiny amplitudes, where the
# finite difference is dominated by rounding rather than the derivative
FD_MIN_GAP = 1e-2
FD_MIN_WEIGHT = 1e-3
HESSIAN_FD_MIN_GAP = 5e-2
HESSIAN_FD_REL_FLOOR = 0.1


@dataclass
class ExperimentResult:
    estimates: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)


def _pick_rng(seed: int, label: str, r: int) -> np.random.Generator:
    return np.random.default_rng([derive_seed(seed, label), int(r)])


# ---------------------------------------------------------------------------
# dirichlet-oracle


def dirichlet_deviation(n: int) -> tuple:
    """Max eigenvalue and (sign-aligned) eigenvector deviation from the closed form."""
    exact = eigensolve.dirichlet_spectrum(n)
    w, v = eigensolve.symmetric_eigh(open_chain(np.zeros(n)))
    signs = np.sign(np.sum(v * exact.eigenvectors, axis=0))
    signs[signs == 0] = 1.0
    ev_dev = float(np.max(np.abs(w - exact.eigenvalues)))
    vec_dev = float(np.max(np.abs(v * signs[None, :] - exact.eigenvectors)))
    return ev_dev, vec_dev


def gap_witness(n_max: int) -> tuple:
    """``(min over n of n^2 min_gap(n), argmin n)`` for ``2 <= n <= n_max``."""
    best, arg = math.inf, 2
    for n in range(2, n_max + 1):
        val = n * n * eigensolve.dirichlet_min_gap(n)
        if val < best:
            best, arg = val, n
    return best, arg


def run_dirichlet(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(columns=["n", "max_eigenvalue_deviation", "max_eigenvector_deviation", "n2_min_gap"])
    ev_max = vec_max = 0.0
    for n in range(2, cfg.n_max + 1):
        ev, vec = dirichlet_deviation(n)
        ev_max, vec_max = max(ev_max, ev), max(vec_max, vec)
        res.rows.append((n, ev, vec, n * n * eigensolve.dirichlet_min_gap(n)))
    witness, arg = gap_witness(cfg.gap_n_max)
    res.estimates.update(
        {
            "max_eigenvalue_deviation": ev_max,
            "max_eigenvector_deviation": vec_max,
            "min_n2_gap": witness,
            "min_n2_gap_at": arg,
            "K1_calibrated": 1.0 / witness,
        }
    )
    res.checks.update(
        {
            "eigenvalues_within_1e-10": ev_max < 1e-10,
            "eigenvectors_within_1e-8": vec_max < 1e-8,
            "n2_min_gap_at_least_0.5": witness >= 0.5,
        }
    )
    return res


# ---------------------------------------------------------------------------
# dos


def default_dos_grid(spec: DisorderSpec, d: int) -> list:
    lo = spec.a - 2 * d - 0.25
    hi = spec.b + 2 * d + 0.25
    return [lo, hi, int(round((hi - lo) / 0.01)) + 1]


def run_dos(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    d, L = cfg.d, cfg.L
    grid = cfg.grid if cfg.grid is not None else default_dos_grid(spec, d)
    cfg.params["grid"] = grid
    xs = np.linspace(grid[0], grid[1], int(grid[2]))
    dos = spectral_stats.estimate_dos(d, L, spec, cfg.realizations, xs, cfg.h, cfg.workers)
    top = spectral_stats.counts_below(d, L, spec, [spec.b + 2 * d], cfg.realizations, cfg.workers)
    N_top = float(top.mean()) / dos.volume
    res = ExperimentResult(columns=["E", "nu_hat", "nu_se", "N_hat"])
    for E, nu, se, N in zip(dos.grid, dos.nu_hat, dos.nu_se, dos.N_hat):
        res.rows.append((float(E), float(nu), float(se), float(N)))
    mass = dos.total_mass()
    res.estimates.update({"total_mass": mass, "N_hat_at_top": N_top, "nu_max": float(dos.nu_hat.max()), "volume": dos.volume})
    res.flags["bandwidth_warning"] = dos.bandwidth_warning
    res.checks.update({"total_mass_within_0.02": abs(mass - 1.0) <= 0.02, "N_hat_top_equals_1": N_top == 1.0})
    return res


# ---------------------------------------------------------------------------
# wegner / minami / decorrelation


def _report_into(res: ExperimentResult, report) -> None:
    res.estimates.update(report.estimates)
    res.standard_errors.update(report.standard_errors)
    res.statistics.update(report.statistics)
    res.statistics["ratios"] = report.ratios
    res.flags.update(report.flags)


def run_wegner(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    vol = build_cube(cfg.d, cfg.L).n_sites
    counts = spectral_stats.window_counts(cfg.d, cfg.L, spec, [cfg.J], cfg.realizations, cfg.workers)[:, 0]
    report = spectral_stats.wegner_from_counts(counts, cfg.J, vol, spec.density_max)
    res = ExperimentResult(columns=["realization_index", "count_J"])
    res.rows = [(r, int(c)) for r, c in enumerate(counts)]
    _report_into(res, report)
    ratio = report.ratios["per_width_volume"]
    res.checks["ratio_below_density_max"] = ratio is not None and ratio <= spec.density_max
    return res


def run_minami(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    vol = build_cube(cfg.d, cfg.L).n_sites
    counts = spectral_stats.window_counts(cfg.d, cfg.L, spec, [cfg.J, cfg.K], cfg.realizations, cfg.workers)
    report = spectral_stats.minami_from_counts(counts[:, 0], counts[:, 1], cfg.J, cfg.K, vol, spec.density_max)
    res = ExperimentResult(columns=["realization_index", "count_J", "count_K"])
    res.rows = [(r, int(a), int(b)) for r, (a, b) in enumerate(counts)]
    _report_into(res, report)
    ratio = report.ratios["per_widths_volume_sq"]
    res.checks["ratio_below_bound_constant"] = ratio is not None and ratio <= report.ratios["bound_constant"]
    return res


def run_decorrelation(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    Ls = cfg.L if isinstance(cfg.L, list) else [cfg.L]
    res = ExperimentResult(columns=["L", "ell", "realization_index", "count_E", "count_E_prime"])
    per_L = []
    for L in Ls:
        rep = spectral_stats.decorrelation_estimator(cfg.d, L, cfg.alpha, cfg.E, cfg.E_prime, spec, cfg.realizations, cfg.workers)
        ell = rep.parameters["ell"]
        res.rows.extend((L, ell, r, int(a), int(b)) for r, (a, b) in enumerate(rep.rows))
        per_L.append({"L": L, "ell": ell, "estimates": rep.estimates, "standard_errors": rep.standard_errors, "ratios": rep.ratios, "flags": rep.flags})
    res.statistics["per_L"] = per_L
    res.flags["one_dimensional"] = cfg.d == 1
    res.flags["energies_far_apart"] = abs(cfg.E - cfg.E_prime) > 2 * cfg.d
    if len(per_L) > 1:
        vals = [p["ratios"]["P_both_over_scale_d"] for p in per_L]
        ses = [p["ratios"]["P_both_over_scale_d_se"] for p in per_L]
        res.checks["P_both_over_scale_d_decreasing_within_2se"] = spectral_stats.decreasing_within_se(vals, ses, 2.0)
    return res


# ---------------------------------------------------------------------------
# poisson / independence


def _nu_gate(cfg: ExperimentConfig, spec: DisorderSpec, E: float) -> tuple:
    nu, se = spectral_stats.estimate_nu(cfg.d, cfg.L, spec.with_seed(derive_seed(cfg.seed, "dos")), E, cfg.dos_realizations, cfg.h, cfg.workers)
    if not nu > cfg.nu_min:
        raise HypothesisError(
            f"rescaled level statistics need nu(E) > 0: estimated nu({E}) = {nu:.4g} is not above nu_min = {cfg.nu_min} "
            f"(seed={cfg.seed}, dos_realizations={cfg.dos_realizations})"
        )
    return nu, se


def run_poisson(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    nu, nu_se = _nu_gate(cfg, spec, cfg.E)
    vol = build_cube(cfg.d, cfg.L).n_sites
    xi_lo = min(min(w[0] for w in cfg.windows), cfg.spacing_window[0])
    xi_hi = max(max(w[1] for w in cfg.windows), cfg.spacing_window[1])
    # a little slack so points sitting exactly on a window edge survive rescaling
    pad = 1e-9
    e_window = (cfg.E + xi_lo / (vol * nu) - pad, cfg.E + xi_hi / (vol * nu) + pad)
    levels = spectral_stats.levels_near(cfg.d, cfg.L, spec, [e_window], cfg.realizations, cfg.workers)
    samples = [spectral_stats.rescale_levels(lv[0], cfg.E, nu, vol, {"realization_index": r}) for r, lv in enumerate(levels)]
    report = spectral_stats.poisson_gof(samples, cfg.windows, cfg.spacing_window)
    res = ExperimentResult(columns=["realization_index", "n_levels"] + [f"count_window_{i}" for i in range(len(cfg.windows))])
    for r, s in enumerate(samples):
        res.rows.append((r, int(s.points.size), *[s.count_in(lo, hi) for lo, hi in cfg.windows]))
    res.estimates["nu_at_E"] = nu
    res.standard_errors["nu_at_E"] = nu_se
    _report_into(res, report)
    for i, w in enumerate(report.statistics["windows"]):
        res.checks[f"tv_window_{i}_below_0.1"] = w["tv_distance"] < 0.1
    res.checks["ks_spacings_below_0.08"] = report.statistics["spacings"]["ks_distance"] < 0.08
    return res


def run_independence(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    nu, nu_se = _nu_gate(cfg, spec, cfg.E)
    nu_p, nu_p_se = _nu_gate(cfg, spec, cfg.E_prime)
    vol = build_cube(cfg.d, cfg.L).n_sites
    w = (cfg.E + cfg.window[0] / (vol * nu), cfg.E + cfg.window[1] / (vol * nu))
    wp = (cfg.E_prime + cfg.window_prime[0] / (vol * nu_p), cfg.E_prime + cfg.window_prime[1] / (vol * nu_p))
    counts = spectral_stats.window_counts(cfg.d, cfg.L, spec, [w, wp], cfg.realizations, cfg.workers)
    report = spectral_stats.independence_test(counts[:, 0], counts[:, 1], cfg.probes)
    res = ExperimentResult(columns=["realization_index", "count_E", "count_E_prime"])
    res.rows = [(r, int(a), int(b)) for r, (a, b) in enumerate(counts)]
    res.estimates.update({"nu_at_E": nu, "nu_at_E_prime": nu_p})
    res.standard_errors.update({"nu_at_E": nu_se, "nu_at_E_prime": nu_p_se})
    _report_into(res, report)
    rho = report.statistics["pearson"]
    res.checks["abs_pearson_below_0.1"] = rho is not None and abs(rho) < 0.1
    res.checks["laplace_gap_below_0.05"] = report.statistics["max_abs_laplace_gap"] < 0.05
    return res


# ---------------------------------------------------------------------------
# localization / box matching


def _localization_one(d, L, spec, window, r):
    cube = build_cube(d, L)
    H = assemble_hamiltonian(cube, sample_potential(cube, spec, r))
    sample = eig_all(H, meta={"seed": spec.base_seed, "realization_index": r})
    resid, gram = eigensolve.residual_check(H, sample)
    lo, hi = window
    sel = np.nonzero((sample.eigenvalues >= lo) & (sample.eigenvalues <= hi))[0]
    records = localization.localization_centers(sample, cube, sel)
    return np.array([rec.decay_rate for rec in records]), resid, gram


def run_localization(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    fn = partial(_localization_one, cfg.d, cfg.L, spec, tuple(cfg.energy_window))
    out = map_realizations(fn, range(cfg.realizations), cfg.workers, cfg.seed)
    res = ExperimentResult(columns=["realization_index", "median_decay_rate", "n_in_window", "max_residual", "max_gram_deviation"])
    for r, (rates, resid, gram) in enumerate(out):
        res.rows.append((r, float(np.median(rates)) if rates.size else None, int(rates.size), resid, gram))
    pooled = np.concatenate([o[0] for o in out])
    median = float(np.median(pooled)) if pooled.size else float("nan")
    res.estimates.update(
        {
            "median_decay_rate": median,
            "n_eigenvectors": int(pooled.size),
            "max_residual": max(o[1] for o in out),
            "max_gram_deviation": max(o[2] for o in out),
        }
    )
    res.checks["median_decay_rate_above_0.1"] = median > 0.1
    res.checks["residual_below_1e-10"] = res.estimates["max_residual"] < eigensolve.RESIDUAL_TOL
    res.checks["gram_below_1e-10"] = res.estimates["max_gram_deviation"] < eigensolve.ORTHO_TOL
    return res


def _box_matching_one(spec, d, L, ells, epsilon, window, r):
    return [localization.box_matching(spec, d, L, ell, epsilon, window, r) for ell in ells]


def run_box_matching(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    fn = partial(_box_matching_one, spec, cfg.d, cfg.L, tuple(cfg.ell), cfg.epsilon, tuple(cfg.energy_window))
    out = map_realizations(fn, range(cfg.realizations), cfg.workers, cfg.seed)
    res = ExperimentResult(columns=["realization_index", "ell", "eigenvalue", "distance"])
    per_ell = []
    for i, ell in enumerate(cfg.ell):
        dists, rates, matched = [], [], 0
        for r, reps in enumerate(out):
            rep = reps[i]
            matched += rep["matched"]
            rates.append(rep["decay_rate"])
            dists.extend(rep["distances"])
            res.rows.extend((r, ell, e, dist) for e, dist in zip(rep["eigenvalues"], rep["distances"]))
        rate = float(np.nanmedian(rates)) if rates else float("nan")
        per_ell.append(
            {
                "ell": ell,
                "ell_outer": int(round(ell * (1 + cfg.epsilon))),
                "matched": matched,
                "max_distance": max(dists) if dists else None,
                "median_decay_rate": rate,
                "reference_scale": math.exp(-rate * cfg.epsilon * ell / 4.0) if math.isfinite(rate) else None,
            }
        )
    res.statistics["per_ell"] = per_ell
    maxima = [p["max_distance"] for p in per_ell]
    res.checks["all_matched_nonempty"] = all(p["matched"] > 0 for p in per_ell)
    res.checks["max_distance_below_1e-2"] = all(m is not None and m < 1e-2 for m in maxima)
    if len(maxima) > 1:
        res.checks["halves_when_ell_doubles"] = all(
            a is not None and b is not None and b < 0.5 * a for a, b in zip(maxima, maxima[1:])
        )
    return res


# ---------------------------------------------------------------------------
# perturbation checks


def gradient_identity_deviation(sample) -> tuple:
    """``(simple count, max | sum phi^2 - 1 |, min phi^2)`` over simple eigenvalues."""
    n_simple, worst, lowest = 0, 0.0, math.inf
    for n in range(len(sample)):
        if not sample.gap_to_rest(n) > localization.SIMPLICITY_GAP:
            continue
        g = localization.eigen_gradient(sample, n).gradient
        n_simple += 1
        worst = max(worst, abs(float(g.sum()) - 1.0))
        lowest = min(lowest, float(g.min()))
    return n_simple, worst, lowest


def fd_gradient_pick(sample, values, cube, rng) -> tuple:
    """Relative error of the analytic gradient at a random admissible ``(n, gamma)``."""
    cand = [n for n in range(len(sample)) if sample.gap_to_rest(n) > FD_MIN_GAP]
    n = int(rng.choice(cand))
    g = sample.eigenvectors[:, n] ** 2
    sites = np.nonzero(g >= FD_MIN_WEIGHT)[0]
    gamma = int(rng.choice(sites))
    fd = localization.fd_gradient(cube, values, n, gamma)
    return n, gamma, abs(fd - g[gamma]) / g[gamma]


def hessian_checks(sample, values, cube, rng, patterns: int) -> dict:
    cand = [n for n in range(len(sample)) if sample.gap_to_rest(n) > HESSIAN_FD_MIN_GAP]
    n = int(rng.choice(cand))
    hess = localization.eigen_hessian(sample, n)
    sym = float(np.max(np.abs(hess - hess.T)))
    diag = np.abs(np.diag(hess))
    sites = np.nonzero(diag >= HESSIAN_FD_REL_FLOOR * diag.max())[0]
    gamma = int(rng.choice(sites))
    fd = localization.fd_hessian_diagonal(cube, values, n, gamma)
    fd_rel = abs(fd - hess[gamma, gamma]) / abs(hess[gamma, gamma])
    N = len(sample)
    a = rng.choice([-1.0, 1.0], size=(patterns, N))
    b = rng.choice([-1.0, 1.0], size=(patterns, N))
    pair = localization.hessian_pairing_bound(sample, n, a, b, hess)
    return {"n": n, "gamma": gamma, "symmetry": sym, "fd_rel": fd_rel, "pairing_max_ratio": pair["max_ratio"], "pairing_holds": pair["holds"]}


def _perturbation_one(spec, d, L, R, fd_samples, hess_instances, patterns, r):
    cube = build_cube(d, L)
    pot = sample_potential(cube, spec, r)
    sample = eig_all(assemble_hamiltonian(cube, pot), meta={"seed": spec.base_seed, "realization_index": r})
    row = {"realization_index": r}
    if r < R:
        row["n_simple"], row["max_l1_deviation"], row["min_component"] = gradient_identity_deviation(sample)
        sep = localization.gradient_separation_batch(sample, pot, spec.K, d)
        row.update({k: sep[k] for k in ("checked", "violations_i", "violations_ii")})
    if r < fd_samples:
        _, _, row["fd_gradient_rel_error"] = fd_gradient_pick(sample, pot.values, cube, _pick_rng(spec.base_seed, "fd-gradient", r))
    if r < hess_instances:
        h = hessian_checks(sample, pot.values, cube, _pick_rng(spec.base_seed, "hessian", r), patterns)
        row.update({"hessian_symmetry": h["symmetry"], "hessian_fd_rel_error": h["fd_rel"], "pairing_max_ratio": h["pairing_max_ratio"]})
    return row


def random_unit_l1_pair(rng: np.random.Generator, n_max: int) -> tuple:
    """Random nonnegative ``u, v`` with unit l1 norm; mixes dense, sparse and near-equal draws."""
    n = int(rng.integers(2, n_max + 1))
    kind = rng.integers(0, 4)
    u = rng.exponential(size=n)
    v = rng.exponential(size=n)
    if kind == 1:
        u *= rng.random(n) < 0.3
        v *= rng.random(n) < 0.3
        u[rng.integers(n)] += 1.0
        v[rng.integers(n)] += 1.0
    elif kind == 2:
        v = u + rng.uniform(0, 10.0 ** rng.uniform(-12, -1), size=n)
    u /= u.sum()
    v /= v.sum()
    return u, v


def minor_inequality_trials(seed: int, trials: int, n_max: int) -> dict:
    rng = np.random.default_rng(derive_seed(seed, "minor"))
    violations, tightest = 0, math.inf
    for _ in range(trials):
        u, v = random_unit_l1_pair(rng, n_max)
        lhs, rhs = localization.minor_lower_bound(u, v, check=False)
        if lhs < rhs:
            violations += 1
        if rhs > 0:
            tightest = min(tightest, lhs / rhs)
    return {"trials": trials, "violations": violations, "min_lhs_over_rhs": tightest}


def run_perturbation(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.disorder_spec()
    R = cfg.realizations
    total = max(R, cfg.fd_samples, cfg.hessian_instances)
    fn = partial(_perturbation_one, spec, cfg.d, cfg.L, R, cfg.fd_samples, cfg.hessian_instances, cfg.sign_patterns)
    out = map_realizations(fn, range(total), cfg.workers, cfg.seed)
    cols = [
        "realization_index",
        "n_simple",
        "max_l1_deviation",
        "min_component",
        "fd_gradient_rel_error",
        "hessian_symmetry",
        "hessian_fd_rel_error",
        "pairing_max_ratio",
        "checked",
        "violations_i",
        "violations_ii",
    ]
    res = ExperimentResult(columns=cols)
    res.rows = [tuple(row.get(c) for c in cols) for row in out]

    def col(name):
        return [row[name] for row in out if name in row]

    minor = minor_inequality_trials(cfg.seed, cfg.minor_trials, cfg.minor_n_max)
    res.estimates.update(
        {
            "max_l1_deviation": max(col("max_l1_deviation")),
            "min_gradient_component": min(col("min_component")),
            "max_fd_gradient_rel_error": max(col("fd_gradient_rel_error")),
            "max_hessian_asymmetry": max(col("hessian_symmetry")),
            "max_hessian_fd_rel_error": max(col("hessian_fd_rel_error")),
            "max_pairing_ratio": max(col("pairing_max_ratio")),
            "separation_pairs_checked": sum(col("checked")),
            "separation_violations_i": sum(col("violations_i")),
            "separation_violations_ii": sum(col("violations_ii")),
        }
    )
    res.statistics["minor_inequality"] = minor
    e = res.estimates
    res.checks.update(
        {
            "gradient_sums_to_1": e["max_l1_deviation"] <= GRADIENT_SUM_TOL,
            "gradient_nonnegative": e["min_gradient_component"] >= 0.0,
            "fd_gradient_below_1e-4": e["max_fd_gradient_rel_error"] < FD_GRADIENT_TOL,
            "hessian_symmetric_exactly": e["max_hessian_asymmetry"] == 0.0,
            "hessian_fd_below_1e-3": e["max_hessian_fd_rel_error"] < FD_HESSIAN_TOL,
            "pairing_bound_holds": e["max_pairing_ratio"] <= 1.0,
            "minor_inequality_holds": minor["violations"] == 0,
            "separation_i_holds": e["separation_violations_i"] == 0,
            "separation_ii_holds": e["separation_violations_ii"] == 0,
        }
    )
    return res


RUNNERS = {
    "dirichlet-oracle": run_dirichlet,
    "dos": run_dos,
    "wegner": run_wegner,
    "minami": run_minami,
    "decorrelation": run_decorrelation,
    "poisson": run_poisson,
    "independence": run_independence,
    "localization": run_localization,
    "box-matching": run_box_matching,
    "perturbation-checks": run_perturbation,
}
