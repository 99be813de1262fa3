"""Lattice cubes, i.i.d. disorder and the periodic Anderson Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import rng

MAX_SITES = 10**6
LAWS = ("uniform", "triangular")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeCube:
    """The box ``[-L, L]^d`` with periodic geometry.

    Flat index ``i`` enumerates multi-indices row-major over ``x_1 .. x_d``
    with each coordinate ascending, so flat order is lexicographic order.
    """

    d: int
    L: int

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def n_sites(self) -> int:
        return self.side**self.d

    @cached_property
    def coords(self) -> np.ndarray:
        """Multi-indices of all sites, shape ``(n_sites, d)``."""
        grids = np.indices((self.side,) * self.d).reshape(self.d, -1).T
        return grids - self.L

    def flat_index(self, multi) -> int:
        multi = np.asarray(multi, dtype=np.int64)
        if multi.shape != (self.d,) or np.any(np.abs(multi) > self.L):
            raise ModelError(f"multi-index {multi.tolist()} outside [-{self.L},{self.L}]^{self.d}")
        idx = 0
        for c in multi:
            idx = idx * self.side + int(c) + self.L
        return idx

    def multi_index(self, flat: int) -> tuple:
        if not 0 <= flat < self.n_sites:
            raise ModelError(f"flat index {flat} outside 0..{self.n_sites - 1}")
        return tuple(int(c) for c in self.coords[flat])

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Periodic neighbor table, shape ``(n_sites, 2d)``."""
        shape = (self.side,) * self.d
        ids = np.arange(self.n_sites).reshape(shape)
        cols = []
        for axis in range(self.d):
            for step in (-1, 1):
                cols.append(np.roll(ids, -step, axis=axis).ravel())
        return np.stack(cols, axis=1)

    def periodic_distance(self, center) -> np.ndarray:
        """Euclidean norm of per-coordinate wrapped offsets from ``center``."""
        delta = np.abs(self.coords - np.asarray(center)[None, :])
        delta = np.minimum(delta, self.side - delta)
        return np.sqrt(np.sum(delta.astype(float) ** 2, axis=1))


def build_cube(d: int, L: int, max_sites: int = MAX_SITES) -> LatticeCube:
    if int(d) != d or d < 1:
        raise ModelError(f"dimension d must be a positive integer, got {d!r}")
    if int(L) != L or L < 1:
        raise ModelError(f"half-side L must be >= 1 (L=0 wraps a site onto itself), got {L!r}")
    cube = LatticeCube(int(d), int(L))
    if cube.n_sites > max_sites:
        raise ModelError(f"(2L+1)^d = {cube.n_sites} exceeds the site cap {max_sites}")
    return cube


@dataclass(frozen=True)
class DisorderSpec:
    """Law of the i.i.d. on-site potential plus the base seed."""

    law: str = "uniform"
    a: float = 0.0
    b: float = 4.0
    base_seed: int = 12345

    def __post_init__(self):
        if self.law not in LAWS:
            raise ModelError(f"unknown disorder law {self.law!r}; expected one of {LAWS}")
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ModelError(f"disorder bounds need a < b, got a={self.a}, b={self.b}")
        if not 0 <= int(self.base_seed) <= rng.MASK64:
            raise ModelError(f"base_seed must fit in 64 unsigned bits, got {self.base_seed}")

    @property
    def K(self) -> float:
        """Bound on ``|omega|``."""
        return max(abs(self.a), abs(self.b))

    @property
    def density_max(self) -> float:
        """Supremum of the density g."""
        width = self.b - self.a
        return 1.0 / width if self.law == "uniform" else 2.0 / width

    def density(self, x):
        x = np.asarray(x, dtype=float)
        width = self.b - self.a
        inside = (x >= self.a) & (x <= self.b)
        if self.law == "uniform":
            return np.where(inside, 1.0 / width, 0.0)
        mid = 0.5 * (self.a + self.b)
        tri = (2.0 / width) * (1.0 - np.abs(x - mid) / (0.5 * width))
        return np.where(inside, tri, 0.0)

    def with_seed(self, seed: int) -> "DisorderSpec":
        return DisorderSpec(self.law, self.a, self.b, int(seed))


@dataclass(frozen=True)
class Potential:
    cube: LatticeCube
    values: np.ndarray
    seed_used: int
    realization_index: int


def _site_draws(spec: DisorderSpec, realization_index: int, coords: np.ndarray) -> np.ndarray:
    seeds = rng.stream_seeds(spec.base_seed, realization_index, coords)
    draws = 1 if spec.law == "uniform" else 2
    u = rng.unit_uniform(rng.xoshiro_outputs(seeds, draws))
    width = spec.b - spec.a
    if spec.law == "uniform":
        vals = spec.a + width * u[:, 0]
    else:
        vals = spec.a + width * 0.5 * (u[:, 0] + u[:, 1])
    return np.clip(vals, spec.a, spec.b)


def sample_potential(cube: LatticeCube, spec: DisorderSpec, realization_index: int) -> Potential:
    """I.i.d. potential for one realization.

    Site streams are keyed by lattice coordinates, so two cubes sharing a
    site see the same value there for the same realization.
    """
    if realization_index < 0:
        raise ModelError(f"realization_index must be >= 0, got {realization_index}")
    vals = _site_draws(spec, realization_index, cube.coords)
    vals.setflags(write=False)
    return Potential(cube, vals, spec.base_seed, int(realization_index))


def restrict_potential(spec: DisorderSpec, realization_index: int, cube: LatticeCube, shift=None) -> Potential:
    """Potential on ``shift + cube`` read from the same coordinate-keyed streams."""
    coords = cube.coords if shift is None else cube.coords + np.asarray(shift, dtype=np.int64)[None, :]
    vals = _site_draws(spec, realization_index, coords)
    vals.setflags(write=False)
    return Potential(cube, vals, spec.base_seed, int(realization_index))


@dataclass
class HamiltonianMatrix:
    """``-Delta + V`` on a periodic cube: unit hops plus a diagonal."""

    cube: LatticeCube
    diagonal: np.ndarray
    hopping: float = 1.0
    _dense: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.cube.n_sites

    def matvec(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.diagonal * u + self.hopping * u[self.cube.neighbors].sum(axis=1)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            n = self.n
            h = np.zeros((n, n))
            rows = np.repeat(np.arange(n), 2 * self.cube.d)
            # np.add.at so that L=1 double-wraps accumulate correctly
            np.add.at(h, (rows, self.cube.neighbors.ravel()), self.hopping)
            h[np.diag_indices(n)] += self.diagonal
            h.setflags(write=False)
            self._dense = h
        return self._dense

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.diagonal**2) + self.n * 2 * self.cube.d * self.hopping**2))

    def gershgorin_bounds(self):
        r = 2 * self.cube.d * abs(self.hopping)
        return float(self.diagonal.min() - r), float(self.diagonal.max() + r)


def assemble_hamiltonian(cube: LatticeCube, pot: Potential) -> HamiltonianMatrix:
    if pot.cube != cube or len(pot.values) != cube.n_sites:
        raise ModelError("potential was sampled on a different cube")
    return HamiltonianMatrix(cube, np.asarray(pot.values, dtype=float))


def hamiltonian_from_values(cube: LatticeCube, values) -> HamiltonianMatrix:
    values = np.asarray(values, dtype=float)
    if values.shape != (cube.n_sites,):
        raise ModelError(f"expected {cube.n_sites} potential values, got shape {values.shape}")
    return HamiltonianMatrix(cube, values)


def open_chain(diagonal, hopping: float = 1.0) -> np.ndarray:
    """Dense open-boundary tridiagonal matrix (Dirichlet chain when diagonal = 0)."""
    diagonal = np.asarray(diagonal, dtype=float)
    n = diagonal.shape[0]
    h = np.diag(diagonal)
    idx = np.arange(n - 1)
    h[idx, idx + 1] = hopping
    h[idx + 1, idx] = hopping
    return h
