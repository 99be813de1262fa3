import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from anderson_levels import eigensolve
from anderson_levels.eigensolve import ConvergenceError, eig_all, symmetric_eigh
from anderson_levels.model import DisorderSpec, assemble_hamiltonian, build_cube, hamiltonian_from_values, open_chain, sample_potential


def test_free_chain_d1_L1():
    w, v = symmetric_eigh(hamiltonian_from_values(build_cube(1, 1), np.zeros(3)).dense())
    assert np.allclose(w, [-1, -1, 2], atol=1e-14)
    assert np.allclose(v.T @ v, np.eye(3), atol=1e-14)


def test_diagonal_matrix_permutation_vectors():
    w, v = symmetric_eigh(np.diag([3.0, 1.0, 2.0]))
    assert list(w) == [1.0, 2.0, 3.0]
    assert np.array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])


def test_empty_and_nonsquare():
    w, v = symmetric_eigh(np.zeros((0, 0)))
    assert w.size == 0
    with pytest.raises(ValueError):
        symmetric_eigh(np.zeros((2, 3)))


def test_nonconvergence_raises_with_context():
    a = open_chain(np.arange(6.0))
    with pytest.raises(ConvergenceError, match="seed=1"):
        symmetric_eigh(a, max_sweeps=0, context="(seed=1, realization_index=0)")


@pytest.mark.parametrize("n", [2, 3, 7, 50, 200])
def test_dirichlet_closed_form(n):
    exact = eigensolve.dirichlet_spectrum(n)
    w, v = symmetric_eigh(open_chain(np.zeros(n)))
    assert np.max(np.abs(w - exact.eigenvalues)) < 1e-10
    signs = np.sign(np.sum(v * exact.eigenvectors, axis=0))
    assert np.max(np.abs(v * signs - exact.eigenvectors)) < 1e-8


def test_dirichlet_n1_and_gaps():
    assert abs(eigensolve.dirichlet_spectrum(1).eigenvalues[0]) < 1e-15
    assert math.isclose(eigensolve.dirichlet_min_gap(2), 2.0)
    assert math.isclose(eigensolve.dirichlet_min_gap(3), math.sqrt(2))
    for n in range(2, 60):
        assert math.isclose(eigensolve.dirichlet_min_gap(n), eigensolve.dirichlet_min_gap_bruteforce(n), rel_tol=1e-12)


def test_calibrated_K1():
    k1 = eigensolve.calibrate_K1(2000)
    assert 0 < k1 <= 2.0


def test_eig_all_random_instances_against_lapack():
    spec = DisorderSpec(base_seed=4)
    for d, L in [(1, 30), (2, 5), (3, 2)]:
        cube = build_cube(d, L)
        H = assemble_hamiltonian(cube, sample_potential(cube, spec, 0))
        s = eig_all(H)
        assert np.allclose(s.eigenvalues, np.linalg.eigvalsh(H.dense()), atol=1e-11)
        res, gram = eigensolve.residual_check(H, s)
        assert res < eigensolve.RESIDUAL_TOL and gram < eigensolve.ORTHO_TOL
        assert s.meta["d"] == d and s.meta["L"] == L


def test_eig_all_respects_dense_limit():
    cube = build_cube(1, 10)
    H = hamiltonian_from_values(cube, np.zeros(21))
    with pytest.raises(ValueError, match="exceeds"):
        eig_all(H, dense_limit=20)


@pytest.mark.parametrize("x,expected", [(0.0, 1), (3.0, 3), (-3.0, 0), (math.sqrt(2) + 1e-9, 3)])
def test_sturm_dirichlet_n3(x, expected):
    assert eigensolve.sturm_count(np.zeros(3), np.ones(2), x) == expected


def test_sturm_vs_dense_100_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        diag = rng.uniform(-3, 3, n)
        off = rng.uniform(-1.5, 1.5, n - 1)
        w = np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
        for x in rng.uniform(-5, 5, 5):
            assert eigensolve.sturm_count(diag, off, x) == int(np.sum(w < x))


def test_cyclic_counts_vs_dense():
    spec = DisorderSpec(base_seed=8)
    for L in (1, 2, 5, 40):
        cube = build_cube(1, L)
        H = assemble_hamiltonian(cube, sample_potential(cube, spec, L))
        w = np.linalg.eigvalsh(H.dense())
        xs = np.linspace(-3, 7, 301)
        assert np.array_equal(eigensolve.count_below(H, xs), np.searchsorted(w, xs, side="left"))
        got = eigensolve.eigenvalues_in_window(H, 0.5, 3.5)
        assert np.allclose(got, w[(w >= 0.5) & (w <= 3.5)], atol=1e-12)


def test_count_in_closed_interval_and_empty():
    H = hamiltonian_from_values(build_cube(1, 1), np.zeros(3))
    assert eigensolve.count_in(H, -1.0, -1.0) == 2
    assert eigensolve.count_in(H, 2.0, 3.0) == 1
    assert eigensolve.count_in(H, 1.0, 0.0) == 0


def test_count_below_d2_uses_dense_path():
    cube = build_cube(2, 3)
    H = assemble_hamiltonian(cube, sample_potential(cube, DisorderSpec(), 1))
    w = np.linalg.eigvalsh(H.dense())
    assert np.array_equal(eigensolve.count_below(H, [1.0, 2.0]), np.searchsorted(w, [1.0, 2.0]))


sym_mats = st.integers(1, 12).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False, width=64))
)


@settings(max_examples=60, deadline=None)
@given(sym_mats)
def test_eigh_properties(m):
    a = 0.5 * (m + m.T)
    w, v = symmetric_eigh(a)
    n = a.shape[0]
    scale = max(1.0, np.linalg.norm(a))
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(v.T @ v - np.eye(n))) < 1e-10
    assert np.max(np.abs(a @ v - v * w)) < 1e-10 * scale
    assert math.isclose(w.sum(), np.trace(a), abs_tol=1e-9 * scale)
    assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10 * scale)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 30).flatmap(
        lambda n: st.tuples(
            arrays(np.float64, n, elements=st.floats(-4, 4, width=64)),
            arrays(np.float64, n - 1, elements=st.floats(-2, 2, width=64)),
            st.floats(-7, 7, width=64),
        )
    )
)
def test_sturm_property(args):
    diag, off, x = args
    w = np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
    # away from eigenvalues the count is unambiguous
    if np.min(np.abs(w - x)) > 1e-9:
        assert eigensolve.sturm_count(diag, off, x) == int(np.sum(w < x))
