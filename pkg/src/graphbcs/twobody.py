"""Two particles of opposite spin on a quantum graph.

The orbital wavefunction phi(x1, x2) is resolved by exchange parity. The
symmetric (singlet) sector feels the pairing term; the antisymmetric
(triplet, S_z = 0) sector vanishes on the diagonal x1 = x2 and is blind to it.

Each sector is written in an explicit symmetrized pair basis:
``|x, x>`` and ``(|x1, x2> + |x2, x1>)/sqrt(2)`` for the symmetric sector,
``(|x1, x2> - |x2, x1>)/sqrt(2)`` with x1 < x2 for the antisymmetric one.
States are unit-normalized on the full N x N grid.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import ChainSpec, QuantumGraph, build_chain, chain_distances, shortest_path_distances
from .spectral import single_particle_hamiltonian

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"


class InteractionKind(str, enum.Enum):
    HUBBARD = "hubbard"
    BCS = "bcs"


@dataclass(frozen=True)
class Interaction:
    """Pairing term ``-g sum_lr Gamma_lr c+_l_up c+_l_dn c_r_dn c_r_up``.

    ``Gamma_lr = 1`` for BCS, ``delta_lr`` for Hubbard. Negative ``strength``
    gives the repulsive variant.
    """

    kind: InteractionKind
    strength: float

    def __post_init__(self):
        object.__setattr__(self, "kind", InteractionKind(self.kind))
        if not math.isfinite(self.strength):
            raise ValueError(f"interaction strength must be finite, got {self.strength}")


def bcs(g: float) -> Interaction:
    return Interaction(InteractionKind.BCS, g)


def hubbard(g: float) -> Interaction:
    return Interaction(InteractionKind.HUBBARD, g)


def sector_pairs(n: int, symmetric: bool) -> np.ndarray:
    """Ordered site pairs (x1 <= x2, or x1 < x2) labelling a sector basis."""
    k = 0 if symmetric else 1
    i, j = np.triu_indices(n, k=k)
    return np.column_stack([i, j])


def sector_embedding(n: int, symmetric: bool) -> sp.csr_matrix:
    """Sparse ``N^2 x dim`` matrix whose columns are the sector basis states on the grid."""
    pairs = sector_pairs(n, symmetric)
    i, j = pairs[:, 0], pairs[:, 1]
    cols = np.arange(len(pairs))
    diag = i == j
    off = ~diag
    s = 1.0 / math.sqrt(2.0)
    sign = 1.0 if symmetric else -1.0
    rows = np.concatenate([i[diag] * n + i[diag], i[off] * n + j[off], j[off] * n + i[off]])
    cc = np.concatenate([cols[diag], cols[off], cols[off]])
    vals = np.concatenate([np.ones(diag.sum()), np.full(off.sum(), s), np.full(off.sum(), sign * s)])
    return sp.csr_matrix((vals, (rows, cc)), shape=(n * n, len(pairs)))


@dataclass(frozen=True, eq=False)
class TwoBodyProblem:
    graph: QuantumGraph
    interaction: Interaction
    sym_pairs: np.ndarray
    anti_pairs: np.ndarray
    sym_operator: np.ndarray
    anti_operator: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites


def kinetic_operator(graph: QuantumGraph) -> sp.csr_matrix:
    """Two-particle kinetic term on the full grid, index ``x1 * N + x2``."""
    h = sp.csr_matrix(single_particle_hamiltonian(graph))
    one = sp.identity(graph.n_sites, format="csr")
    return (sp.kron(h, one) + sp.kron(one, h)).tocsr()


def assemble(graph: QuantumGraph, interaction: Interaction) -> TwoBodyProblem:
    n = graph.n_sites
    kin = kinetic_operator(graph)
    ops = {}
    for symmetric in (True, False):
        s = sector_embedding(n, symmetric)
        ops[symmetric] = (s.T @ kin @ s).toarray()
    sym = ops[True]
    # diagonal pairs (y, y) are unit-weight basis states of the symmetric sector
    pairs = sector_pairs(n, True)
    d = np.flatnonzero(pairs[:, 0] == pairs[:, 1])
    g = interaction.strength
    if interaction.kind is InteractionKind.HUBBARD:
        sym[d, d] -= g
    else:
        sym[np.ix_(d, d)] -= g
    return TwoBodyProblem(graph, interaction, pairs, sector_pairs(n, False), sym, ops[False])


@dataclass(frozen=True, eq=False)
class TwoBodySolution:
    """Eigenpairs of both exchange sectors.

    ``depairing_energy`` is the gap between the two lowest symmetric-sector
    eigenvalues.
    """

    problem: TwoBodyProblem
    sym_energies: np.ndarray
    anti_energies: np.ndarray
    sym_vectors: Optional[np.ndarray]
    anti_vectors: Optional[np.ndarray]

    @property
    def ground_energy(self) -> float:
        return float(self.sym_energies[0])

    @property
    def depairing_energy(self) -> float:
        return float(self.sym_energies[1] - self.sym_energies[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.wavefunction(0)

    def energies(self) -> np.ndarray:
        """Both sectors merged, ascending."""
        return np.sort(np.concatenate([self.sym_energies, self.anti_energies]))

    def wavefunction(self, k: int = 0, sector: str = SYMMETRIC) -> np.ndarray:
        """The k-th eigenstate of ``sector`` as an ``N x N`` grid ``phi[x1, x2]``."""
        vecs = self.sym_vectors if sector == SYMMETRIC else self.anti_vectors
        if vecs is None:
            raise ValueError(f"{sector} eigenvectors were not computed")
        n = self.problem.n_sites
        emb = sector_embedding(n, sector == SYMMETRIC)
        return (emb @ vecs[:, k]).reshape(n, n)


def solve(problem: TwoBodyProblem, vectors: bool = True) -> TwoBodySolution:
    if vectors:
        es, vs = np.linalg.eigh(problem.sym_operator)
        ea, va = np.linalg.eigh(problem.anti_operator)
    else:
        es = np.linalg.eigvalsh(problem.sym_operator)
        ea = np.linalg.eigvalsh(problem.anti_operator)
        vs = va = None
    return TwoBodySolution(problem, es, ea, vs, va)


def solve_lowest(problem: TwoBodyProblem, count: int = 2) -> TwoBodySolution:
    """Only the ``count`` lowest symmetric eigenpairs; cheaper for sweeps."""
    m = problem.sym_operator.shape[0]
    count = min(count, m)
    es, vs = scipy.linalg.eigh(problem.sym_operator, subset_by_index=[0, count - 1])
    return TwoBodySolution(problem, es, np.empty(0), vs, None)


@dataclass(frozen=True)
class DosHistogram:
    edges: np.ndarray
    symmetric: np.ndarray
    antisymmetric: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.symmetric + self.antisymmetric

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def dos_histogram(solution: TwoBodySolution, bin_width: float = 0.05) -> DosHistogram:
    """Count two-body eigenvalues in bins of ``bin_width`` aligned to multiples of it."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    es, ea = solution.sym_energies, solution.anti_energies
    if len(es) + len(ea) == 0:
        raise ValueError("empty spectrum")
    both = np.concatenate([es, ea])
    lo = math.floor(both.min() / bin_width)
    hi = math.floor(both.max() / bin_width) + 1
    edges = np.arange(lo, hi + 1) * bin_width
    return DosHistogram(edges, np.histogram(es, edges)[0], np.histogram(ea, edges)[0])


def pair_distance_distribution(phi, distances=None) -> np.ndarray:
    """``P(r)``: probability that the two particles sit ``r`` hops apart.

    ``distances`` defaults to ``|i - j|`` (a plain chain).
    """
    phi = np.asarray(phi)
    prob = np.abs(phi) ** 2
    norm = prob.sum()
    if not norm > 0:
        raise ValueError("zero-norm state")
    d = chain_distances(phi.shape[0]) if distances is None else np.asarray(distances)
    if d.shape != prob.shape:
        raise ValueError(f"distance matrix shape {d.shape} does not match state {prob.shape}")
    return np.bincount(d.ravel().astype(int), weights=prob.ravel()) / norm


def coherence_length(phi, distances) -> float:
    """``xi_C = sqrt(sum_ij D_ij^2 |phi(i,j)|^2)`` for a unit-norm state."""
    phi = np.asarray(phi)
    d = np.asarray(distances, dtype=float)
    if d.shape != phi.shape:
        raise ValueError(f"distance matrix shape {d.shape} does not match state {phi.shape}")
    prob = np.abs(phi) ** 2
    norm = prob.sum()
    if not norm > 0:
        raise ValueError("zero-norm state")
    return math.sqrt(float(np.sum(d ** 2 * prob) / norm))


# -- sweeps over lateral-site position ---------------------------------------

@dataclass(frozen=True)
class DepairingRow:
    position: Optional[int]
    g: float
    depairing: float
    coherence_length: float
    ground_energy: float


def _depairing_point(args) -> DepairingRow:
    spec, g, kind = args
    graph = build_chain(spec)
    sol = solve_lowest(assemble(graph, Interaction(kind, g)), 2)
    xi = coherence_length(sol.ground_state, shortest_path_distances(graph))
    pos = spec.attach_pos if spec.side_sites else None
    return DepairingRow(pos, g, sol.depairing_energy, xi, sol.ground_energy)


def depairing_sweep(total_sites: int, side_sites: int, g_values: Sequence[float],
                    positions: Optional[Sequence[int]] = None,
                    kind: InteractionKind = InteractionKind.BCS,
                    workers: int = 1) -> list[DepairingRow]:
    """Depairing energy and coherence length for every (position, g).

    With ``side_sites == 0`` the position is meaningless and one row per g is
    produced. Rows are ordered by (position, g) regardless of ``workers``.
    """
    if side_sites == 0:
        specs = [ChainSpec(total_sites)]
    else:
        if positions is None:
            positions = range(1, total_sites - side_sites + 1)
        specs = [ChainSpec(total_sites, side_sites, n) for n in positions]
    for s in specs:
        s.validate()
    jobs = [(s, float(g), InteractionKind(kind)) for s in specs for g in g_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_depairing_point, jobs))
    return [_depairing_point(j) for j in jobs]


def enhancement_ratio(total_sites: int, g: float, side_sites: int = 1,
                      position: Optional[int] = None) -> float:
    """Depairing energy with lateral sites at ``position`` over the plain-chain value.

    ``position`` defaults to the backbone midpoint.
    """
    if position is None:
        position = (total_sites - side_sites + 1) // 2
    with_side = _depairing_point((ChainSpec(total_sites, side_sites, position), g, InteractionKind.BCS))
    plain = _depairing_point((ChainSpec(total_sites), g, InteractionKind.BCS))
    return with_side.depairing / plain.depairing


# -- CSV export --------------------------------------------------------------

def write_spectra_csv(solution: TwoBodySolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sector", "index", "energy_K"])
        for name, vals in ((SYMMETRIC, solution.sym_energies), (ANTISYMMETRIC, solution.anti_energies)):
            for i, e in enumerate(vals):
                w.writerow([name, i, repr(float(e))])


def write_wavefunction_csv(phi, path, spin_doubled: bool = False) -> None:
    """Grid of ``|phi(i, j)|^2`` with 1-based site labels.

    With ``spin_doubled`` the values are doubled so that they sum to 2,
    the convention where both spin orderings of the singlet are counted.
    """
    prob = np.abs(np.asarray(phi)) ** 2
    if spin_doubled:
        prob = 2.0 * prob
    n = prob.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "abs_phi_sq"])
        for i in range(n):
            for j in range(n):
                w.writerow([i + 1, j + 1, repr(float(prob[i, j]))])


def write_pdist_csv(p: np.ndarray, path, label: str = "P") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r_hops", label])
        for r, v in enumerate(p):
            w.writerow([r, repr(float(v))])
