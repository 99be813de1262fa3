import numpy as np
import pytest

from anderson_levels import kernels

BACKENDS = kernels.backends()


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in BACKENDS


def _tridiag(diag, off):
    return np.diag(diag) + np.diag(off[:-1], 1) + np.diag(off[:-1], -1)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_tridiagonalize_similarity(name):
    m = BACKENDS[name]
    rng = np.random.default_rng(1)
    a = rng.standard_normal((9, 9))
    a = a + a.T
    diag, off, q = m.tridiagonalize(a.copy(), True)
    assert np.allclose(q.T @ q, np.eye(9), atol=1e-13)
    assert np.allclose(q.T @ a @ q, _tridiag(diag, off), atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_tql_eigenpairs(name):
    m = BACKENDS[name]
    rng = np.random.default_rng(2)
    diag = rng.uniform(-2, 2, 40)
    off = np.append(rng.uniform(-1, 1, 39), 0.0)
    t = _tridiag(diag, off)
    d, e = diag.copy(), off.copy()
    z = np.eye(40)
    sweeps = m.tql(d, e, z, 1200)
    assert sweeps >= 0
    assert np.allclose(t @ z, z * d, atol=1e-12)
    assert m.tql(diag.copy(), off.copy(), None, 0) == -1


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    rng = np.random.default_rng(3)
    a = rng.standard_normal((30, 30))
    a = a + a.T
    r1 = py.tridiagonalize(a.copy(), True)
    r2 = cy.tridiagonalize(a.copy(), True)
    for x, y in zip(r1, r2):
        assert np.allclose(x, y, atol=1e-12)
    diag = rng.uniform(0, 4, 25)
    off = np.append(np.ones(24), 0.0)
    xs = np.linspace(-3, 7, 200)
    assert np.array_equal(py.cyclic_count(diag, xs), cy.cyclic_count(diag, xs))
    for x in xs[::10]:
        assert py.sturm_count(diag, off, x) == cy.sturm_count(diag, off, x)
    assert np.allclose(py.cyclic_bisect(diag, 0.5, 3.5, 1e-13), cy.cyclic_bisect(diag, 0.5, 3.5, 1e-13), atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_cyclic_count_strict_at_eigenvalue(name):
    m = BACKENDS[name]
    # free 3-cycle: eigenvalues -1, -1, 2
    assert list(m.cyclic_count(np.zeros(3), np.array([-1.0, 2.0, 2.5]))) == [0, 2, 3]


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_read_only_inputs(name):
    m = BACKENDS[name]
    diag = np.arange(5.0)
    diag.setflags(write=False)
    assert m.cyclic_count(diag, np.array([10.0]))[0] == 5
