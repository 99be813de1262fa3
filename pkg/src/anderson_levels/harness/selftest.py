"""Fast closed-form checks plus a worker-count determinism check."""

from __future__ import annotations

import filecmp
import math
import tempfile
from pathlib import Path

import numpy as np

from .. import eigensolve, localization, spectral_stats
from ..model import DisorderSpec, ModelError, assemble_hamiltonian, build_cube, hamiltonian_from_values, open_chain, sample_potential
from .config import ConfigError, config_from_dict, parse_config
from .runner import run_experiment


def _raises(exc, fn, *args):
    try:
        fn(*args)
    except exc:
        return True
    return False


def _free_spectrum(d, L):
    cube = build_cube(d, L)
    w, _ = eigensolve.symmetric_eigh(hamiltonian_from_values(cube, np.zeros(cube.n_sites)).dense())
    return w


def check_cube_sizes():
    return build_cube(1, 1).n_sites == 3 and build_cube(2, 2).n_sites == 25 and _raises(ModelError, build_cube, 1, 0)


def check_potential_determinism_and_support():
    cube = build_cube(1, 20)
    spec = DisorderSpec("uniform", 0.0, 1.0, 7)
    a = sample_potential(cube, spec, 3).values
    b = sample_potential(cube, spec, 3).values
    return np.array_equal(a, b) and a.min() >= 0.0 and a.max() <= 1.0


def check_free_spectra():
    ok = np.allclose(_free_spectrum(1, 1), [-1.0, -1.0, 2.0], atol=1e-12)
    exact = np.sort(2 * np.cos(2 * np.pi * np.arange(5) / 5))
    return ok and np.allclose(_free_spectrum(1, 2), exact, atol=1e-12)


def check_hamiltonian_symmetry():
    cube = build_cube(2, 3)
    H = assemble_hamiltonian(cube, sample_potential(cube, DisorderSpec(), 0)).dense()
    return float(np.max(np.abs(H - H.T))) == 0.0


def check_diagonal_matrix():
    w, v = eigensolve.symmetric_eigh(np.diag([3.0, 1.0, 2.0]))
    return np.array_equal(w, [1.0, 2.0, 3.0]) and np.array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])


def check_sturm():
    z = np.zeros(3)
    ones = np.ones(2)
    return eigensolve.sturm_count(z, ones, 0.0) == 1 and eigensolve.sturm_count(z, ones, 3.0) == 3


def check_dirichlet_small():
    gaps_ok = math.isclose(eigensolve.dirichlet_min_gap(2), 2.0) and math.isclose(eigensolve.dirichlet_min_gap(3), math.sqrt(2))
    return gaps_ok and abs(eigensolve.dirichlet_spectrum(1).eigenvalues[0]) < 1e-15


def check_rescaling():
    levels = np.array([1.0, 2.0, 3.0])
    s = spectral_stats.rescale_levels(levels, 2.0, 0.5, volume=10)
    s2 = spectral_stats.rescale_levels(levels, 2.0, 1.0, volume=10)
    return s.points[1] == 0.0 and np.array_equal(2 * s.points, s2.points)


def check_window_trivia():
    spec = DisorderSpec("uniform", 0.0, 4.0, 1)
    vol = build_cube(1, 10).n_sites
    full = spectral_stats.window_counts(1, 10, spec, [(-2.0, 6.0)], 20)[:, 0]
    empty = spectral_stats.window_counts(1, 10, spec, [(7.0, 8.0)], 20)[:, 0]
    return bool(np.all(full == vol)) and bool(np.all(empty == 0))


def check_poisson_self_test():
    rng = np.random.default_rng(0)
    counts = rng.poisson(2.0, size=10**4)
    other = rng.poisson(2.0, size=10**4)
    tv_ok = spectral_stats.total_variation_poisson(counts, 2.0) < 0.02
    corr_ok = abs(spectral_stats.pearson(counts, other)) < 3 / math.sqrt(counts.size)
    return tv_ok and corr_ok and spectral_stats.laplace_gap(counts, other, 0.0, 0.0) == 0.0


def check_localization_trivia():
    cube = build_cube(1, 5)
    phi = np.zeros(cube.n_sites)
    phi[4] = 1.0
    tie = np.zeros(cube.n_sites)
    tie[[2, 7]] = 0.5
    return localization.localization_center(phi, cube) == 4 and localization.localization_center(tie, cube) == 2


def check_minor_trivia():
    lhs, rhs = localization.minor_lower_bound([1.0, 0.0], [0.0, 1.0])
    lhs2, rhs2 = localization.minor_lower_bound([0.5, 0.5], [0.5, 0.5])
    return lhs == 1.0 and rhs == 1 / 32 and lhs2 == 0.0 and rhs2 == 0.0


def check_open_chain_oracle():
    w, _ = eigensolve.symmetric_eigh(open_chain(np.zeros(3)))
    return np.allclose(w, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-14)


def check_config_parsing():
    ok = parse_config('{"experiment":"dirichlet-oracle","n_max":200}').n_max == 200
    try:
        config_from_dict({"experiment": "decorrelation", "alpha": 1.5})
        ok = False
    except ConfigError as exc:
        ok = ok and exc.path == "alpha"
    try:
        config_from_dict({"experiment": "wegner", "typo_key": 1})
        ok = False
    except ConfigError as exc:
        ok = ok and "typo_key" in str(exc)
    return ok


TRIVIAL_CHECKS = [
    check_cube_sizes,
    check_potential_determinism_and_support,
    check_free_spectra,
    check_hamiltonian_symmetry,
    check_diagonal_matrix,
    check_sturm,
    check_dirichlet_small,
    check_open_chain_oracle,
    check_rescaling,
    check_window_trivia,
    check_poisson_self_test,
    check_localization_trivia,
    check_minor_trivia,
    check_config_parsing,
]

DETERMINISM_CONFIGS = [
    {"experiment": "wegner", "L": 50, "realizations": 400},
    {"experiment": "perturbation-checks", "L": 10, "realizations": 16, "fd_samples": 4, "hessian_instances": 4, "minor_trials": 200},
    {"experiment": "box-matching", "L": 60, "ell": [10, 20], "realizations": 4},
]


def outputs_identical(raw: dict, worker_counts=(1, 8)) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for w in worker_counts:
            d = Path(tmp) / f"w{w}"
            run_experiment(config_from_dict(raw), workers=w, out_dir=d)
            dirs.append(d)
        return all(
            filecmp.cmp(dirs[0] / name, other / name, shallow=False) for other in dirs[1:] for name in ("summary.json", "samples.csv")
        )


def run_selftest(report=print, worker_counts=(1, 8)) -> bool:
    ok = True
    for check in TRIVIAL_CHECKS:
        try:
            passed = bool(check())
        except Exception as exc:  # a crash is a failure, with the reason shown
            passed = False
            report(f"FAIL {check.__name__}: {exc!r}")
            ok = False
            continue
        report(f"{'PASS' if passed else 'FAIL'} {check.__name__}")
        ok &= passed
    for raw in DETERMINISM_CONFIGS:
        same = outputs_identical(raw, worker_counts)
        report(f"{'PASS' if same else 'FAIL'} determinism[{raw['experiment']}] workers={list(worker_counts)}")
        ok &= same
    return ok
