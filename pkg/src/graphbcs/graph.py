"""Quantum-graph topologies: chains, chains with lateral sites, custom graphs.

Nodes are 0-based in every array. ``ChainSpec.attach_pos`` is the one
1-based quantity, counted along the backbone, so that ``attach_pos=20`` on a
40-site graph with one lateral site is the backbone midpoint.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

MAX_SIDE_SITES = 3


class GraphError(ValueError):
    """Raised when a graph or chain specification violates its invariants.

    ``problems`` lists every violation found, not just the first one.
    """

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class ChainSpec:
    """A linear backbone with ``side_sites`` pendant vertices stacked on one node.

    Parameters
    ----------
    total_sites : int
        Total number of nodes N, lateral sites included.
    side_sites : int
        Number m of lateral sites, 0 to 3.
    attach_pos : int, optional
        1-based backbone node n carrying the lateral sites. Required when
        ``side_sites > 0``; ignored otherwise.
    boundary : Boundary
        ``periodic`` closes the backbone into a ring (only for m = 0).
    """

    total_sites: int
    side_sites: int = 0
    attach_pos: Optional[int] = None
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def backbone(self) -> int:
        return self.total_sites - self.side_sites

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.total_sites, (int, np.integer)) or self.total_sites < 1:
            return [f"total_sites must be a positive integer, got {self.total_sites!r}"]
        if not 0 <= self.side_sites <= MAX_SIDE_SITES:
            out.append(f"side_sites must be in 0..{MAX_SIDE_SITES}, got {self.side_sites}")
        if self.backbone < 2:
            out.append(f"backbone length N-m = {self.backbone} must be >= 2")
        if self.side_sites > 0:
            if self.attach_pos is None:
                out.append("attach_pos is required when side_sites > 0")
            elif not 1 <= self.attach_pos <= self.backbone:
                out.append(f"attach_pos out of range 1..{self.backbone}")
        if self.boundary is Boundary.PERIODIC:
            if self.side_sites != 0:
                out.append("periodic boundary requires m=0")
            if self.total_sites < 3:
                out.append("periodic boundary requires at least 3 sites")
        return out

    def validate(self) -> "ChainSpec":
        problems = self.problems()
        if problems:
            raise GraphError(problems)
        return self

    def mirrored(self) -> "ChainSpec":
        """The same family member reflected about the backbone midpoint."""
        if self.side_sites == 0:
            return self
        return ChainSpec(self.total_sites, self.side_sites,
                         self.backbone + 1 - self.attach_pos, self.boundary)


def validation_problems(adjacency, onsite, hopping) -> list[str]:
    a = np.asarray(adjacency)
    problems = []
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        return [f"adjacency must be a non-empty square matrix, got shape {a.shape}"]
    n = a.shape[0]
    if not np.all(np.isin(a, (0, 1))):
        problems.append("adjacency entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        problems.append("adjacency is not symmetric")
    if np.any(np.diag(a) != 0):
        problems.append("adjacency has nonzero diagonal")
    eps = np.asarray(onsite, dtype=float)
    if eps.shape != (n,):
        problems.append(f"onsite must have length {n}, got shape {eps.shape}")
    elif not np.all(np.isfinite(eps)):
        problems.append("onsite energies must be finite")
    if not (np.isfinite(hopping) and hopping > 0):
        problems.append(f"hopping must be > 0, got {hopping}")
    if not problems:
        ncomp, _ = connected_components(csr_matrix(a), directed=False)
        if ncomp > 1:
            problems.append(f"graph is disconnected ({ncomp} components)")
    return problems


@dataclass(frozen=True, eq=False)
class QuantumGraph:
    """Adjacency, on-site energies (units of K) and hopping scale K.

    Instances are validated on construction and immutable afterwards.
    """

    adjacency: np.ndarray
    onsite: np.ndarray
    hopping: float = 1.0
    spec: Optional[ChainSpec] = field(default=None, compare=False)

    def __post_init__(self):
        problems = validation_problems(self.adjacency, self.onsite, self.hopping)
        if problems:
            raise GraphError(problems)
        adj = np.array(self.adjacency, dtype=np.int8)
        eps = np.array(self.onsite, dtype=float)
        adj.flags.writeable = False
        eps.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "onsite", eps)
        object.__setattr__(self, "hopping", float(self.hopping))

    @property
    def n_sites(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))


def build_chain(spec: ChainSpec, onsite=None, hopping: float = 1.0) -> QuantumGraph:
    """Build the graph of a :class:`ChainSpec`.

    Backbone nodes come first (indices ``0 .. N-m-1``); the lateral sites take
    the trailing indices and all attach to backbone node ``attach_pos - 1``.
    """
    spec.validate()
    n = spec.total_sites
    adj = np.zeros((n, n), dtype=np.int8)
    b = spec.backbone
    idx = np.arange(b - 1)
    adj[idx, idx + 1] = adj[idx + 1, idx] = 1
    if spec.boundary is Boundary.PERIODIC:
        adj[0, b - 1] = adj[b - 1, 0] = 1
    for k in range(spec.side_sites):
        adj[b + k, spec.attach_pos - 1] = adj[spec.attach_pos - 1, b + k] = 1
    eps = np.zeros(n) if onsite is None else onsite
    return QuantumGraph(adj, eps, hopping, spec=spec)


def build_custom(adjacency, onsite=None, hopping: float = 1.0) -> QuantumGraph:
    a = np.asarray(adjacency)
    eps = np.zeros(a.shape[0]) if onsite is None else onsite
    return QuantumGraph(a, eps, hopping)


def shortest_path_distances(g: QuantumGraph) -> np.ndarray:
    """All-pairs hop counts as an integer matrix."""
    d = shortest_path(csr_matrix(g.adjacency), method="D", directed=False, unweighted=True)
    return d.astype(int)


def chain_distances(n: int) -> np.ndarray:
    """``|i - j|`` on an n-node path, the distance used for plain chains."""
    x = np.arange(n)
    return np.abs(x[:, None] - x[None, :])


# -- edge-list text format ---------------------------------------------------
#
#   # N 40
#   # K 1.0
#   # eps 5 0.25        (1-based node, on-site energy; repeatable)
#   1 2
#   2 3
#   ...

def write_edge_list(g: QuantumGraph, path) -> None:
    lines = [f"# N {g.n_sites}", f"# K {g.hopping!r}"]
    for i, e in enumerate(g.onsite):
        if e != 0.0:
            lines.append(f"# eps {i + 1} {float(e)!r}")
    lines += [f"{i + 1} {j + 1}" for i, j in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_edge_list(lines: Iterable[str]) -> QuantumGraph:
    n = None
    hopping = 1.0
    eps_over: dict[int, float] = {}
    edges = []
    problems = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if not tok:
                continue
            key = tok[0]
            try:
                if key == "N":
                    n = int(tok[1])
                elif key == "K":
                    hopping = float(tok[1])
                elif key == "eps":
                    eps_over[int(tok[1])] = float(tok[2])
            except (IndexError, ValueError):
                problems.append(f"line {lineno}: malformed header {line!r}")
            continue
        tok = line.split()
        try:
            i, j = int(tok[0]), int(tok[1])
            if len(tok) != 2:
                raise ValueError
        except (IndexError, ValueError):
            problems.append(f"line {lineno}: expected 'i j', got {line!r}")
            continue
        edges.append((i, j))
    if n is None:
        n = max((max(e) for e in edges), default=0)
    for i, j in edges:
        if not (1 <= i <= n and 1 <= j <= n):
            problems.append(f"edge ({i}, {j}) outside 1..{n}")
        elif i == j:
            problems.append(f"self-loop at node {i}")
    for i in eps_over:
        if not 1 <= i <= n:
            problems.append(f"eps override for node {i} outside 1..{n}")
    if problems:
        raise GraphError(problems)
    adj = np.zeros((n, n), dtype=np.int8)
    for i, j in edges:
        adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1
    eps = np.zeros(n)
    for i, e in eps_over.items():
        eps[i - 1] = e
    return QuantumGraph(adj, eps, hopping)


def read_edge_list(path) -> QuantumGraph:
    with open(path) as fh:
        return parse_edge_list(fh)
