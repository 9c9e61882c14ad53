"""Exact diagonalization of the reduced BCS model among fully paired states.

Each level is empty or holds one pair (hard-core boson). With ``n_p`` pairs
on ``N`` levels the matrix has ``C(N, n_p)`` rows:

    H[c, c]  = sum_{i in c} 2 E_i - g n_p
    H[c, c'] = -g      when c' is c with one pair moved

The ground vector gives the occupations ``nu_i``; a BCS-form fit of those
occupations yields the chemical potential and the pairing parameter.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import brentq, least_squares, minimize_scalar

from .graph import ChainSpec, build_chain
from .richardson import spectroscopic_gap
from .spectral import graph_spectrum

MAX_CONFIGURATIONS = 1_000_000
DENSE_LIMIT = 4000
DEGENERACY_TOL = 1e-10


class BasisTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PairBasis:
    """Lexicographic list of occupied-level tuples (0-based level indices)."""

    level_count: int
    n_pairs: int
    configurations: tuple

    @classmethod
    def build(cls, level_count: int, n_pairs: int) -> "PairBasis":
        if not 0 <= n_pairs <= level_count:
            raise ValueError(f"need 0 <= n_pairs <= {level_count}, got {n_pairs}")
        size = math.comb(level_count, n_pairs)
        if size > MAX_CONFIGURATIONS:
            raise BasisTooLargeError(
                f"C({level_count},{n_pairs}) = {size} configurations exceeds {MAX_CONFIGURATIONS}")
        return cls(level_count, n_pairs,
                   tuple(itertools.combinations(range(level_count), n_pairs)))

    def __len__(self):
        return len(self.configurations)

    def occupancy(self) -> np.ndarray:
        """Boolean matrix, one row per configuration, one column per level."""
        occ = np.zeros((len(self), self.level_count), dtype=bool)
        for k, c in enumerate(self.configurations):
            occ[k, list(c)] = True
        return occ


def _energies(levels) -> np.ndarray:
    e = np.asarray(getattr(levels, "energies", levels), dtype=float)
    if e.ndim != 1 or not np.all(np.isfinite(e)):
        raise ValueError("levels must be a finite vector")
    return e


def build_pair_hamiltonian(levels, g: float, n_pairs: int):
    """Sparse CSR matrix of the model on :class:`PairBasis` ``(len(levels), n_pairs)``."""
    e = _energies(levels)
    basis = PairBasis.build(len(e), n_pairs)
    index = {c: k for k, c in enumerate(basis.configurations)}
    diag = np.array([2.0 * e[list(c)].sum() for c in basis.configurations]) - g * n_pairs
    rows, cols = [], []
    if g != 0:
        for k, c in enumerate(basis.configurations):
            occupied = set(c)
            empty = [b for b in range(len(e)) if b not in occupied]
            for a in c:
                rest = occupied - {a}
                for b in empty:
                    rows.append(k)
                    cols.append(index[tuple(sorted(rest | {b}))])
    off = scipy.sparse.csr_matrix((np.full(len(rows), -float(g)), (rows, cols)),
                                  shape=(len(basis),) * 2)
    return (scipy.sparse.diags(diag) + off).tocsr(), basis


def ground_state(levels, g: float, n_pairs: int):
    """Lowest eigenpair ``(energy, vector, basis)`` of the paired-sector matrix."""
    h, basis = build_pair_hamiltonian(levels, g, n_pairs)
    if len(basis) <= DENSE_LIMIT:
        w, v = scipy.linalg.eigh(h.toarray(), subset_by_index=[0, 0])
    else:
        w, v = scipy.sparse.linalg.eigsh(h, k=1, which="SA", tol=1e-14)
    vec = v[:, 0]
    # Perron-Frobenius: for g > 0 the ground vector can be chosen positive
    if vec.sum() < 0:
        vec = -vec
    return float(w[0]), vec, basis


@dataclass(frozen=True, eq=False)
class OccupationProfile:
    energies: np.ndarray
    nu: np.ndarray
    g: float
    n_pairs: int
    degenerate_fermi: bool = False


def _fermi_shell(e: np.ndarray, n_pairs: int) -> tuple[int, int]:
    """Index range [lo, hi) of levels degenerate with the last filled level."""
    if n_pairs == 0 or n_pairs == len(e):
        return n_pairs, n_pairs
    ef = e[n_pairs - 1]
    close = np.abs(e - ef) <= DEGENERACY_TOL * max(1.0, abs(ef))
    idx = np.flatnonzero(close)
    return int(idx[0]), int(idx[-1]) + 1


def ground_occupations(levels, g: float, n_pairs: int) -> OccupationProfile:
    """Pair occupation ``nu_i`` of every level in the ground state.

    At ``g = 0`` the profile is a step. If the last filled level is degenerate
    the step is taken as the ``g -> 0+`` limit: the k pairs left for a D-fold
    shell spread evenly, ``nu = k / D`` on each shell level, and the profile
    is flagged.
    """
    e = _energies(levels)
    if not np.all(np.diff(e) >= 0):
        raise ValueError("levels must be ascending")
    if not (math.isfinite(g) and g >= 0):
        raise ValueError(f"g must be >= 0, got {g}")
    if g == 0:
        nu = np.zeros(len(e))
        lo, hi = _fermi_shell(e, n_pairs)
        nu[:lo] = 1.0
        if hi > lo:
            nu[lo:hi] = (n_pairs - lo) / (hi - lo)
        return OccupationProfile(e, nu, 0.0, n_pairs, hi > n_pairs)
    _, vec, basis = ground_state(e, g, n_pairs)
    nu = (vec ** 2) @ basis.occupancy()
    return OccupationProfile(e, nu / np.sum(vec ** 2), float(g), n_pairs)


# -- BCS-form fit ------------------------------------------------------------

def bcs_v2(energies, mu: float, delta: float) -> np.ndarray:
    """``v^2 = (1 - (E - mu) / sqrt((E - mu)^2 + Delta^2)) / 2``."""
    x = np.asarray(energies, dtype=float) - mu
    if delta == 0:
        return np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    return 0.5 * (1.0 - x / np.hypot(x, delta))


@dataclass(frozen=True)
class BcsFitResult:
    mu: float
    delta: float
    rss: float
    constraint_gap: float
    degenerate: bool = False


def _result(e, nu, n_pairs, mu, delta, degenerate=False) -> BcsFitResult:
    v2 = bcs_v2(e, mu, delta)
    return BcsFitResult(float(mu), float(delta), float(np.sum((v2 - nu) ** 2)),
                        float(abs(v2.sum() - n_pairs)), degenerate)


def _check_profile(profile: OccupationProfile):
    e, nu = np.asarray(profile.energies, float), np.asarray(profile.nu, float)
    if e.shape != nu.shape or e.ndim != 1 or len(e) < 2:
        raise ValueError("profile needs matching energy and occupation vectors of length >= 2")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(nu))):
        raise ValueError("profile contains non-finite values")
    return e, nu


def _step_fit(e, nu, n_pairs) -> Optional[BcsFitResult]:
    """Delta = 0 answer for profiles that carry no smearing information."""
    frac = np.abs(nu - np.round(nu)) > 1e-12
    if np.any(frac):
        return None
    occupied = np.flatnonzero(nu > 0.5)
    empty = np.flatnonzero(nu < 0.5)
    top = e[occupied].max() if len(occupied) else e[0] - 1.0
    bottom = e[empty].min() if len(empty) else e[-1] + 1.0
    return _result(e, nu, n_pairs, 0.5 * (top + bottom), 0.0, degenerate=True)


def fit_bcs(profile: OccupationProfile, levels=None) -> BcsFitResult:
    """Unweighted least-squares fit of ``nu_i`` to the BCS form.

    A coarse grid over ``mu`` in ``[E_1, E_N]`` and ``Delta`` in
    ``(0, bandwidth]`` picks the starting points; Levenberg-Marquardt
    refines them. Profiles that are exact steps (``g = 0``) return
    ``Delta = 0`` flagged as degenerate.
    """
    e, nu = _check_profile(profile)
    if levels is not None and not np.allclose(_energies(levels), e, rtol=0, atol=1e-12):
        raise ValueError("levels do not match the profile energies")
    n_pairs = profile.n_pairs
    if profile.g == 0 or profile.degenerate_fermi:
        step = _step_fit(e, nu, n_pairs)
        if step is not None:
            return step
        lo, hi = _fermi_shell(e, n_pairs)
        return _result(e, nu, n_pairs, e[lo], 0.0, degenerate=True)

    width = e[-1] - e[0]
    mus = np.linspace(e[0], e[-1], 41)
    deltas = np.geomspace(1e-6 * width, width, 41)
    cost = np.array([[np.sum((bcs_v2(e, m, d) - nu) ** 2) for d in deltas] for m in mus])
    starts = np.argsort(cost, axis=None, kind="stable")[:5]

    def resid(p):
        return bcs_v2(e, p[0], abs(p[1])) - nu

    best = None
    for flat in starts:
        i, j = np.unravel_index(flat, cost.shape)
        r = least_squares(resid, [mus[i], deltas[j]], method="lm",
                          xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        if best is None or r.cost < best.cost:
            best = r
    mu, delta = best.x[0], abs(best.x[1])
    return _result(e, nu, n_pairs, mu, delta)


def constrained_mu(energies, delta: float, n_pairs: int) -> float:
    """Chemical potential giving ``sum v_i^2 = n_pairs`` at fixed ``Delta > 0``."""
    e = np.asarray(energies, dtype=float)
    span = e[-1] - e[0] + 10.0 * delta + 1.0
    return brentq(lambda m: bcs_v2(e, m, delta).sum() - n_pairs,
                  e[0] - span, e[-1] + span, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def fit_bcs_constrained(profile: OccupationProfile) -> BcsFitResult:
    """Fit of ``Delta`` alone, with ``mu`` pinned by the particle-number sum."""
    e, nu = _check_profile(profile)
    if profile.g == 0:
        return fit_bcs(profile)
    width = e[-1] - e[0]

    def cost(log_d):
        d = math.exp(log_d)
        return np.sum((bcs_v2(e, constrained_mu(e, d, profile.n_pairs), d) - nu) ** 2)

    grid = np.linspace(math.log(1e-6 * width), math.log(width), 61)
    k = int(np.argmin([cost(x) for x in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    r = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    d = math.exp(r.x)
    return _result(e, nu, profile.n_pairs, constrained_mu(e, d, profile.n_pairs), d)


@dataclass(frozen=True)
class FitRow:
    g: float
    delta: float
    mu: float
    rss: float
    constraint_gap: float


def bcs_fit_sweep(levels, n_pairs: int, g_values: Sequence[float]) -> list[FitRow]:
    rows = []
    for g in g_values:
        f = fit_bcs(ground_occupations(levels, g, n_pairs))
        rows.append(FitRow(float(g), f.delta, f.mu, f.rss, f.constraint_gap))
    return rows


def fit_polynomial(g_values, deltas, degree: int = 3) -> np.ndarray:
    """Least-squares ``Delta(g) = a_1 g + ... + a_degree g^degree`` (no constant)."""
    g = np.asarray(g_values, dtype=float)
    a = np.vstack([g ** k for k in range(1, degree + 1)]).T
    return np.linalg.lstsq(a, np.asarray(deltas, dtype=float), rcond=None)[0]


@dataclass(frozen=True)
class PositionRow:
    position: int
    delta_fit: float
    delta_gap: float


def position_sweep(total_sites: int, n_pairs: int, g: float, side_sites: int = 1,
                   positions: Optional[Sequence[int]] = None) -> list[PositionRow]:
    """Fitted ``Delta`` and the spectroscopic gap versus lateral-site position."""
    if positions is None:
        positions = range(1, total_sites - side_sites + 1)
    rows = []
    for n in positions:
        e = graph_spectrum(build_chain(ChainSpec(total_sites, side_sites, n))).energies
        fit = fit_bcs(ground_occupations(e, g, n_pairs))
        rows.append(PositionRow(int(n), fit.delta, spectroscopic_gap(e, n_pairs, g)))
    return rows


# -- CSV output --------------------------------------------------------------

def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_occupations_csv(profile: OccupationProfile, fit: Optional[BcsFitResult], path) -> None:
    v2 = bcs_v2(profile.energies, fit.mu, fit.delta) if fit is not None else None
    fh, w = _writer(path)
    with fh:
        w.writerow(["i", "E_i_K", "nu_i", "v2_fit"])
        for i, (e, n) in enumerate(zip(profile.energies, profile.nu)):
            w.writerow([i + 1, repr(float(e)), repr(float(n)),
                        "" if v2 is None else repr(float(v2[i]))])


def write_fit_sweep_csv(rows: Sequence[FitRow], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["g_K", "delta_K", "mu_K", "rss", "constraint_gap"])
        for r in rows:
            w.writerow([repr(r.g), repr(r.delta), repr(r.mu), repr(r.rss), repr(r.constraint_gap)])


def write_position_csv(rows: Sequence[PositionRow], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["n", "delta_fit_K", "delta_gap_K"])
        for r in rows:
            w.writerow([r.position, repr(r.delta_fit), repr(r.delta_gap)])
