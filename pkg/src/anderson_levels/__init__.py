"""Discrete Anderson model: eigensolvers, local level statistics and perturbation checks."""

from .kernels import BACKEND
from .model import DisorderSpec, LatticeCube, build_cube, sample_potential, assemble_hamiltonian
from .eigensolve import SpectralSample, eig_all

__version__ = "0.1.0"

__all__ = ["BACKEND", "DisorderSpec", "LatticeCube", "SpectralSample", "assemble_hamiltonian", "build_cube", "eig_all", "sample_potential"]
