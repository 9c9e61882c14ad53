"""Independent reference implementations used only by the tests.

They trade speed for transparency: plain loops, full product bases, no
shared code with the package beyond numpy.
"""

from collections import deque
import itertools
import math

import numpy as np


def bfs_distances(adjacency):
    a = np.asarray(adjacency)
    n = a.shape[0]
    out = np.full((n, n), -1, dtype=int)
    for s in range(n):
        out[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in np.flatnonzero(a[u]):
                if out[s, v] < 0:
                    out[s, v] = out[s, u] + 1
                    q.append(v)
    return out


def product_basis_spectrum(adjacency, onsite, hopping, g, kind):
    """All N^2 two-particle eigenvalues, no exchange-symmetry reduction.

    ``kind`` is ``"hubbard"`` (contact attraction) or ``"bcs"`` (pair hopping
    between any two doubly occupied sites).
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    h1 = np.diag(np.asarray(onsite, dtype=float)) - hopping * a
    h = np.zeros((n * n, n * n))
    for x1 in range(n):
        for x2 in range(n):
            r = x1 * n + x2
            for y in range(n):
                h[r, y * n + x2] += h1[x1, y]
                h[r, x1 * n + y] += h1[x2, y]
    for y in range(n):
        if kind == "hubbard":
            h[y * n + y, y * n + y] -= g
        else:
            for z in range(n):
                h[y * n + y, z * n + z] -= g
    return np.linalg.eigvalsh(h)


def open_chain_levels(n):
    k = np.arange(1, n + 1)
    return np.sort(-2.0 * np.cos(k * np.pi / (n + 1)))


def noninteracting_coherence(n):
    """xi_C of two particles both in the lowest open-chain orbital."""
    i = np.arange(1, n + 1)
    psi2 = 2.0 / (n + 1) * np.sin(np.pi * i / (n + 1)) ** 2
    total = 0.0
    for a in range(n):
        for b in range(n):
            total += (a - b) ** 2 * psi2[a] * psi2[b]
    return math.sqrt(total)


def single_pair_rapidity(energies, g, tol=1e-15):
    """Lowest root of ``1 = sum_j g / (2 E_j - e)`` by bisection below ``2 E_1``."""
    e = np.asarray(energies, dtype=float)

    def f(x):
        with np.errstate(over="ignore"):
            return np.sum(g / (2 * e - x)) - 1.0

    hi = np.nextafter(2 * e.min(), -np.inf)
    lo = 2 * e.min() - g * len(e) - 1.0
    assert f(lo) < 0 < f(hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def reduced_bcs_spectrum(energies, g, n_pairs):
    """Eigenvalues of the paired-sector reduced BCS matrix built on bitmasks."""
    e = np.asarray(energies, dtype=float)
    n = len(e)
    masks = [sum(1 << i for i in c) for c in itertools.combinations(range(n), n_pairs)]
    index = {m: k for k, m in enumerate(masks)}
    h = np.zeros((len(masks), len(masks)))
    for k, m in enumerate(masks):
        for i in range(n):
            if m >> i & 1:
                h[k, k] += 2 * e[i]
        h[k, k] -= g * n_pairs
        for a in range(n):
            if not m >> a & 1:
                continue
            for b in range(n):
                if m >> b & 1:
                    continue
                h[index[m ^ (1 << a) ^ (1 << b)], k] -= g
    return np.linalg.eigvalsh(h)
