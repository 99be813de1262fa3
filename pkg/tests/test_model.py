import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anderson_levels.model import (
    DisorderSpec,
    ModelError,
    assemble_hamiltonian,
    build_cube,
    hamiltonian_from_values,
    restrict_potential,
    sample_potential,
)


def test_cube_sizes():
    assert build_cube(1, 1).n_sites == 3
    assert build_cube(2, 2).n_sites == 25


@pytest.mark.parametrize("d,L", [(1, 0), (0, 3), (1, -1)])
def test_degenerate_cubes_rejected(d, L):
    with pytest.raises(ModelError):
        build_cube(d, L)


def test_oversize_cube_rejected():
    with pytest.raises(ModelError, match="exceeds"):
        build_cube(3, 60)


def test_flat_order_is_lexicographic():
    cube = build_cube(2, 2)
    tuples = [tuple(c) for c in cube.coords]
    assert tuples == sorted(tuples)
    for i, c in enumerate(cube.coords):
        assert cube.flat_index(c) == i
        assert cube.multi_index(i) == tuple(c)


def test_neighbors_wrap_periodically():
    cube = build_cube(1, 2)
    # site x=2 (flat 4) neighbors x=-2 (flat 0) and x=1 (flat 3)
    assert sorted(cube.neighbors[4]) == [0, 3]


def test_periodic_distance():
    cube = build_cube(1, 3)
    dist = cube.periodic_distance((3,))
    assert dist[cube.flat_index((-3,))] == 1.0
    assert dist[cube.flat_index((0,))] == 3.0


def test_potential_deterministic_and_in_support():
    cube = build_cube(2, 4)
    spec = DisorderSpec("uniform", 0.0, 1.0, 99)
    a = sample_potential(cube, spec, 5).values
    b = sample_potential(cube, spec, 5).values
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert not np.array_equal(a, sample_potential(cube, spec, 6).values)


def test_restriction_is_literal_subarray():
    spec = DisorderSpec(base_seed=3)
    big = build_cube(1, 20)
    small = build_cube(1, 5)
    vb = sample_potential(big, spec, 2).values
    vs = restrict_potential(spec, 2, small, shift=[4]).values
    start = big.flat_index((4 - 5,))
    assert np.array_equal(vs, vb[start : start + small.n_sites])


@pytest.mark.parametrize("law,mean,var", [("uniform", 2.0, 16 / 12), ("triangular", 2.0, 16 / 24)])
def test_disorder_moments(law, mean, var):
    # many realizations of a 1001-site chain pooled: ~1e5 draws
    spec = DisorderSpec(law, 0.0, 4.0, 11)
    cube = build_cube(1, 500)
    x = np.concatenate([sample_potential(cube, spec, r).values for r in range(100)])
    assert abs(x.mean() - mean) < 5 * np.sqrt(var / x.size)
    assert abs(x.var() - var) < 0.02


def test_density_and_bounds():
    u = DisorderSpec("uniform", 0.0, 4.0)
    t = DisorderSpec("triangular", 0.0, 4.0)
    assert u.density_max == 0.25 and t.density_max == 0.5
    assert float(t.density(2.0)) == 0.5 and float(t.density(0.0)) == 0.0
    assert u.K == 4.0
    with pytest.raises(ModelError):
        DisorderSpec("cauchy")
    with pytest.raises(ModelError):
        DisorderSpec("uniform", 1.0, 1.0)


def test_free_spectrum_d1_L1():
    cube = build_cube(1, 1)
    w = np.linalg.eigvalsh(hamiltonian_from_values(cube, np.zeros(3)).dense())
    assert np.allclose(w, [-1, -1, 2])


def test_free_spectrum_d2_fourier():
    cube = build_cube(2, 2)
    k = 2 * np.cos(2 * np.pi * np.arange(5) / 5)
    exact = np.sort((k[:, None] + k[None, :]).ravel())
    w = np.linalg.eigvalsh(hamiltonian_from_values(cube, np.zeros(25)).dense())
    assert np.allclose(w, exact, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 50))
def test_hamiltonian_symmetric_and_matvec_consistent(d, L, r):
    cube = build_cube(d, L)
    H = assemble_hamiltonian(cube, sample_potential(cube, DisorderSpec(), r))
    A = H.dense()
    assert np.max(np.abs(A - A.T)) == 0.0
    u = np.random.default_rng(r).standard_normal(cube.n_sites)
    assert np.allclose(A @ u, H.matvec(u))
    lo, hi = H.gershgorin_bounds()
    w = np.linalg.eigvalsh(A)
    assert lo - 1e-12 <= w[0] and w[-1] <= hi + 1e-12
    assert np.isclose(H.frobenius_norm(), np.linalg.norm(A))
