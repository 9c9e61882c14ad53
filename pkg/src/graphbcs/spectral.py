"""Single-particle Hamiltonian of a graph and its dense eigendecomposition."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import QuantumGraph

ORTHO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SingleParticleSpectrum:
    """Ascending levels ``energies`` with eigenvectors in the columns of ``basis``."""

    energies: np.ndarray
    basis: np.ndarray

    def __len__(self):
        return len(self.energies)


def single_particle_hamiltonian(g: QuantumGraph) -> np.ndarray:
    """``h_ij = eps_i delta_ij - K A_ij``."""
    return np.diag(g.onsite) - g.hopping * g.adjacency.astype(float)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(u), axis=0)
    first = np.argmax(np.abs(u) > 1e-12 * scale, axis=0)
    signs = np.sign(u[first, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def eigendecompose_symmetric(h) -> SingleParticleSpectrum:
    """Full spectrum of a real symmetric matrix.

    The first non-negligible component of every eigenvector is made positive
    so the output is deterministic for a given input.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - h.T), initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    w, u = np.linalg.eigh(h)
    return SingleParticleSpectrum(w, _fix_signs(u))


def graph_spectrum(g: QuantumGraph) -> SingleParticleSpectrum:
    return eigendecompose_symmetric(single_particle_hamiltonian(g))


def verify_unitary_reduction(spectrum: SingleParticleSpectrum, tol: float = ORTHO_TOL) -> bool:
    """Check ``V_ij = sum_k U_ki U_kj == delta_ij``.

    This is what turns the real-space pairing term into the reduced BCS
    model in the level basis.
    """
    u = spectrum.basis
    v = u.T @ u
    return bool(np.max(np.abs(v - np.eye(u.shape[1]))) <= tol)


def write_spectrum_csv(spectrum: SingleParticleSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "energy_K"])
        for i, e in enumerate(spectrum.energies, 1):
            w.writerow([i, repr(float(e))])
