import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from anderson_levels import spectral_stats as ss
from anderson_levels.model import DisorderSpec, assemble_hamiltonian, build_cube, sample_potential
from anderson_levels.eigensolve import eig_all

SPEC = DisorderSpec("uniform", 0.0, 4.0, 2024)


# --- rescaling -------------------------------------------------------------


def test_rescale_fixed_point_and_linearity():
    levels = np.array([1.0, 2.0, 2.5])
    a = ss.rescale_levels(levels, 2.0, 0.3, volume=11)
    b = ss.rescale_levels(levels, 2.0, 0.6, volume=11)
    assert a.points[1] == 0.0
    assert np.array_equal(2 * a.points, b.points)


def test_rescale_counting_identity():
    cube = build_cube(1, 40)
    s = eig_all(assemble_hamiltonian(cube, sample_potential(cube, SPEC, 0)))
    E, nu = 2.0, 0.16
    p = ss.rescale_levels(s, E, nu)
    half = 1.0 / (cube.n_sites * nu)
    direct = np.sum((s.eigenvalues >= E - half) & (s.eigenvalues <= E + half))
    assert p.count_in(-1.0, 1.0) == direct


def test_rescale_requires_positive_density():
    with pytest.raises(ss.HypothesisError, match=r"nu\(E\) > 0"):
        ss.rescale_levels(np.array([1.0]), 5.0, 0.0, volume=3)


# --- Poisson / KS statistics ------------------------------------------------


def test_tv_self_test_on_exact_poisson():
    counts = np.random.default_rng(0).poisson(2.0, 10**4)
    assert ss.total_variation_poisson(counts, 2.0) < 0.02
    assert ss.total_variation_poisson(np.full(1000, 7), 2.0) > 0.9


def test_tv_matches_direct_sum():
    counts = np.array([0, 1, 1, 2, 5])
    emp = np.bincount(counts) / counts.size
    pmf = stats.poisson.pmf(np.arange(emp.size), 1.3)
    expected = 0.5 * (np.abs(emp - pmf).sum() + stats.poisson.sf(emp.size - 1, 1.3))
    assert math.isclose(ss.total_variation_poisson(counts, 1.3), expected, rel_tol=1e-12)


def test_chi_square_poisson_against_scipy():
    counts = np.random.default_rng(1).poisson(2.0, 3000)
    chi2, dof, p = ss.chi_square_poisson(counts, 2.0)
    kmax = max(int(counts.max()), int(math.ceil(2 + 6 * math.sqrt(2) + 6)))
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = counts.size * stats.poisson.pmf(np.arange(kmax + 1), 2.0)
    exp[-1] += counts.size * stats.poisson.sf(kmax, 2.0)
    obs, exp = ss._merge_tail(obs, exp)
    ref = stats.chisquare(obs, exp)
    assert math.isclose(chi2, ref.statistic, rel_tol=1e-10)
    assert math.isclose(p, ref.pvalue, rel_tol=1e-8)
    assert dof == len(exp) - 1
    assert np.all(exp >= 5)


def test_ks_against_scipy():
    x = np.random.default_rng(2).exponential(size=2000)
    assert math.isclose(ss.ks_exponential(x), stats.kstest(x, "expon").statistic, rel_tol=1e-12)
    assert ss.ks_exponential(x) < 0.05


def test_window_additivity():
    counts = ss.window_counts(1, 30, SPEC, [(1.0, 1.5), (1.5 + 1e-12, 2.2), (1.0, 2.2)], 40)
    assert np.array_equal(counts[:, 0] + counts[:, 1], counts[:, 2])


def test_poisson_gof_on_synthetic_process():
    rng = np.random.default_rng(3)
    samples = []
    for _ in range(400):
        pts = np.sort(rng.uniform(-10, 10, rng.poisson(20)))
        samples.append(ss.PointProcessSample(0.0, 1.0, 1, pts))
    rep = ss.poisson_gof(samples, [(-1.0, 1.0), (2.0, 3.0)])
    assert rep.statistics["windows"][0]["tv_distance"] < 0.08
    assert rep.statistics["spacings"]["ks_distance"] < 0.03
    assert not rep.flags["low_power"]
    with pytest.raises(ValueError, match="disjoint"):
        ss.poisson_gof(samples, [(-1.0, 1.0), (0.0, 2.0)])


# --- independence ------------------------------------------------------------


def test_pearson_against_numpy_and_degenerate():
    rng = np.random.default_rng(4)
    x, y = rng.poisson(2, 500), rng.poisson(2, 500)
    assert math.isclose(ss.pearson(x, y), np.corrcoef(x, y)[0, 1], rel_tol=1e-10)
    assert ss.pearson(np.ones(5), x[:5]) is None


def test_independent_streams_self_test():
    rng = np.random.default_rng(5)
    R = 5000
    x, y = rng.poisson(2, R), rng.poisson(2, R)
    rep = ss.independence_test(x, y)
    assert abs(rep.statistics["pearson"]) < 3 / math.sqrt(R)
    assert rep.statistics["max_abs_laplace_gap"] < 0.02
    assert ss.laplace_gap(x, y, 0.0, 0.0) == 0.0


def test_chi_square_independence_against_scipy():
    rng = np.random.default_rng(6)
    x, y = rng.integers(0, 3, 2000), rng.integers(0, 3, 2000)
    chi2, dof, p, table = ss.chi_square_independence(x, y)
    ref = stats.chi2_contingency(table, correction=False)
    assert math.isclose(chi2, ref[0], rel_tol=1e-10) and dof == ref[2]


def test_dependent_counts_detected():
    rng = np.random.default_rng(7)
    x = rng.poisson(2, 2000)
    rep = ss.independence_test(x, x)
    assert rep.statistics["pearson"] == pytest.approx(1.0)
    assert rep.statistics["chi_square"]["p_value"] < 1e-6


# --- Wegner / Minami / decorrelation -----------------------------------------


def test_wegner_full_and_empty_windows():
    vol = build_cube(1, 20).n_sites
    full = ss.wegner_estimator(1, 20, SPEC, (-2.0, 6.0), 30)
    assert full.estimates["mean_count"] == vol and full.standard_errors["mean_count"] == 0.0
    empty = ss.wegner_estimator(1, 20, SPEC, (7.0, 8.0), 30)
    assert empty.estimates["mean_count"] == 0.0


def test_minami_consistency_identity():
    J = (1.8, 2.2)
    vol = build_cube(1, 20).n_sites
    w = ss.wegner_estimator(1, 20, SPEC, J, 200)
    m = ss.minami_estimator(1, 20, SPEC, J, (-2.0, 6.0), 200)
    # exact in integers per realization; the means agree up to summation order
    counts = ss.window_counts(1, 20, SPEC, [J, (-2.0, 6.0)], 200)
    assert np.all(counts[:, 1] == vol)
    assert np.array_equal(counts[:, 0] * (counts[:, 1] - 1), (vol - 1) * counts[:, 0])
    assert m.estimates["second_factorial_moment"] == pytest.approx((vol - 1) * w.estimates["mean_count"], rel=1e-14)
    empty = ss.minami_estimator(1, 20, SPEC, (7.0, 7.5), (6.0, 8.0), 50)
    assert empty.estimates["second_factorial_moment"] == 0.0
    with pytest.raises(ValueError, match="not contained"):
        ss.minami_estimator(1, 20, SPEC, (1.0, 3.0), (1.5, 2.0), 5)


def test_decorrelation_same_energy_and_outside_spectrum():
    same = ss.decorrelation_estimator(1, 100, 0.7, 2.0, 2.0, SPEC, 500)
    assert same.estimates["P_both"] == same.estimates["P_E"]
    outside = ss.decorrelation_estimator(1, 100, 0.7, -5.0, 9.0, SPEC, 200)
    assert outside.estimates["P_both"] == outside.estimates["P_E"] == outside.estimates["P_E_prime"] == 0.0
    assert outside.flags["product_ratio_undefined"]
    with pytest.raises(ValueError):
        ss.decorrelation_estimator(1, 100, 1.5, 0.5, 3.5, SPEC, 10)


def test_decreasing_within_se():
    assert ss.decreasing_within_se([3.0, 2.0, 1.0], [0.1, 0.1, 0.1])
    assert ss.decreasing_within_se([1.0, 1.1], [0.1, 0.1])
    assert not ss.decreasing_within_se([1.0, 2.0], [0.1, 0.1])


# --- DOS -----------------------------------------------------------------


def test_dos_mass_and_top():
    d, L = 1, 100
    grid = np.linspace(-2.25, 6.25, 851)
    dos = ss.estimate_dos(d, L, SPEC, 30, grid, 0.05)
    assert abs(dos.total_mass() - 1.0) <= 0.02
    assert dos.N_hat[-1] == 1.0 and dos.N_hat[0] == 0.0
    top = ss.counts_below(d, L, SPEC, [SPEC.b + 2 * d], 30)
    assert np.all(top == build_cube(d, L).n_sites)


def test_estimators_independent_of_worker_count():
    a = ss.window_counts(1, 30, SPEC, [(1.0, 2.0)], 20, workers=1)
    b = ss.window_counts(1, 30, SPEC, [(1.0, 2.0)], 20, workers=3)
    assert np.array_equal(a, b)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 7), st.floats(0.0, 2.0), st.integers(0, 1000))
def test_window_count_matches_dense(lo, width, r):
    cube = build_cube(1, 15)
    spec = SPEC.with_seed(r)
    w = eig_all(assemble_hamiltonian(cube, sample_potential(cube, spec, 0)), want_vectors=False).eigenvalues
    hi = lo + width
    if np.min(np.abs(np.concatenate([w - lo, w - hi]))) < 1e-9:
        return
    c = ss.window_counts(1, 15, spec, [(lo, hi)], 1)[0, 0]
    assert c == np.sum((w >= lo) & (w <= hi))
