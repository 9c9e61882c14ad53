"""Richardson's exact solution of the reduced BCS model.

For single-particle levels ``E_j`` with blocked (singly occupied) set ``B``,
the ``n_p`` pair rapidities ``e_nu`` solve

    1 + sum_{mu != nu} 2g / (e_mu - e_nu) = sum_{j not in B} g / (2 E_j - e_nu)

and the eigenvalue is ``sum_{i in B} E_i + sum_nu e_nu``.

Solutions are followed from ``g -> 0``, where every rapidity sits just below
the pair energy ``2 E_j`` of its seed level, up to the requested coupling.
Unknowns are the offsets ``d_nu = 2 E_{j_nu} - e_nu`` so the near-pole
differences stay exact at small g. Where two real rapidities collide on a
pole the real-axis continuation stalls; the solver then steps around the
collision along a short arc in complex g and lands on the same eigenstate
with the colliding pair turned into complex conjugates.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import ChainSpec, build_chain
from .spectral import graph_spectrum

RESIDUAL_TOL = 1e-10
NEWTON_TOL = 1e-12
G_START = 1e-6
DEGENERACY_TOL = 1e-10


class RichardsonError(RuntimeError):
    pass


class ContinuationError(RichardsonError):
    """Continuation broke down; carries the last point that converged."""

    def __init__(self, message, last_g=None, last_rapidities=None):
        super().__init__(message)
        self.last_g = last_g
        self.last_rapidities = last_rapidities


class CriticalCouplingError(RichardsonError):
    """The requested coupling sits on a rapidity collision (singular Jacobian)."""

    def __init__(self, message, g=None):
        super().__init__(message)
        self.g = g


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Ascending single-particle levels, blocked level indices and pair count."""

    energies: np.ndarray
    blocked: tuple = ()
    n_pairs: int = 0

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        e.flags.writeable = False
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "blocked", tuple(sorted(int(i) for i in self.blocked)))
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        e = self.energies
        out = []
        if e.ndim != 1 or len(e) == 0:
            return ["energies must be a non-empty vector"]
        if np.any(np.diff(e) < 0):
            out.append("energies must be ascending")
        if len(set(self.blocked)) != len(self.blocked):
            out.append("blocked indices must be distinct")
        if any(not 0 <= i < len(e) for i in self.blocked):
            out.append(f"blocked indices must lie in 0..{len(e) - 1}")
        if self.n_pairs < 0:
            out.append("n_pairs must be >= 0")
        elif self.n_pairs > len(e) - len(self.blocked):
            out.append(f"n_pairs={self.n_pairs} exceeds the {len(e) - len(self.blocked)} unblocked levels")
        return out

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(len(self.energies), bool)
        mask[list(self.blocked)] = False
        return np.flatnonzero(mask)

    @property
    def blocked_energy(self) -> float:
        return float(sum(self.energies[i] for i in self.blocked))

    def ground_seed(self) -> tuple:
        return tuple(int(i) for i in self.free[: self.n_pairs])


@dataclass(frozen=True, eq=False)
class RichardsonSolution:
    levels: LevelSet
    g: float
    seed: tuple
    rapidities: np.ndarray
    residual_norm: float
    continuation_trace: tuple = field(repr=False)
    detours: int = 0

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.rapidities.imag == 0))

    @property
    def pair_energy(self) -> float:
        return float(np.sum(self.rapidities.real))

    @property
    def total_energy(self) -> float:
        return self.levels.blocked_energy + self.pair_energy


# -- equations in offset variables -------------------------------------------

def _system(d, poles, seed_poles, g):
    """Residuals and analytic Jacobian with respect to the offsets ``d``."""
    n = len(d)
    a = (poles[None, :] - seed_poles[:, None]) + d[:, None]  # 2E_j - e_nu
    delta = (seed_poles[None, :] - seed_poles[:, None]) - d[None, :] + d[:, None]  # e_mu - e_nu
    np.fill_diagonal(delta, 1.0)
    inv = 1.0 / delta
    np.fill_diagonal(inv, 0.0)
    inv_a = 1.0 / a
    r = 1.0 + 2.0 * g * inv.sum(axis=1) - g * inv_a.sum(axis=1)
    t = 2.0 * g * inv ** 2
    jac = t.astype(complex)
    jac[np.diag_indices(n)] = -t.sum(axis=1) + g * (inv_a ** 2).sum(axis=1)
    return r, jac


def _newton(d, poles, seed_poles, g, max_iter=30):
    d = np.array(d, dtype=complex)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            r, jac = _system(d, poles, seed_poles, g)
            res = np.max(np.abs(r)) if len(r) else 0.0
            if not np.isfinite(res):
                return d, False, res
            if res <= NEWTON_TOL:
                return d, True, res
            try:
                step = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                return d, False, res
            d = d + step
            if not np.all(np.isfinite(d)):
                return d, False, np.inf
            if np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(d))):
                r, _ = _system(d, poles, seed_poles, g)
                res = np.max(np.abs(r))
                return d, res <= RESIDUAL_TOL, res
        r, _ = _system(d, poles, seed_poles, g)
        res = np.max(np.abs(r))
    return d, res <= RESIDUAL_TOL, res


def _laguerre_weights(k: int, multiplicity: int) -> np.ndarray:
    """Small-g offsets (in units of g) of k rapidities on a pole of given multiplicity.

    They are minus the roots of the generalized Laguerre polynomial
    L_k^(alpha) with alpha = -multiplicity - 1.
    """
    if k == 1:
        return np.array([float(multiplicity)], dtype=complex)
    alpha = -multiplicity - 1
    # coefficient of x^i: (-1)^i binom(k + alpha, k - i) / i!
    coeffs = []
    for i in range(k + 1):
        num = 1.0
        for t in range(k - i):
            num *= (k + alpha - t)
        coeffs.append((-1) ** i * num / math.factorial(k - i) / math.factorial(i))
    roots = np.roots(coeffs[::-1])
    return -roots.astype(complex)


def _cluster(values: np.ndarray) -> np.ndarray:
    """Snap numerically degenerate values onto a shared representative."""
    out = values.copy()
    order = np.argsort(values, kind="stable")
    start = 0
    for k in range(1, len(order) + 1):
        if k == len(order) or (values[order[k]] - values[order[k - 1]]
                               > DEGENERACY_TOL * max(1.0, abs(values[order[k]]))):
            grp = order[start:k]
            out[grp] = values[grp].mean()
            start = k
    return out


class _Tracker:
    """Follows one Richardson branch along a parametrized coupling path."""

    def __init__(self, poles, seed_poles):
        self.poles = poles
        self.seed_poles = seed_poles

    def rapidities(self, d):
        return self.seed_poles - d

    def follow(self, gfun, d, t0, t1, dt, record=None):
        """Continue from parameter t0 to t1; returns (d, t_reached, ok, history)."""
        t = t0
        hist = [(t, d)]
        span = t1 - t0
        dt = min(dt, span)
        while t < t1:
            tn = min(t + dt, t1)
            if len(hist) > 1:
                tp, dp = hist[-2]
                pred = d + (d - dp) * (tn - t) / (t - tp)
            else:
                pred = d
            dn, ok, _ = _newton(pred, self.poles, self.seed_poles, gfun(tn))
            scale = np.max(np.abs(dn)) if len(dn) else 0.0
            if ok and np.max(np.abs(dn - pred), initial=0.0) <= 0.2 * scale + 1e-300:
                d, t = dn, tn
                hist.append((t, d))
                if record is not None:
                    record(gfun(t), d)
                dt = min(dt * 1.5, span / 4)
            else:
                dt /= 2
                if dt < 1e-12 * span:
                    return d, t, False, hist
        return d, t, True, hist


def solve_richardson(levels: LevelSet, g: float, seed: Optional[Sequence[int]] = None,
                     max_detours: Optional[int] = None,
                     tol: float = RESIDUAL_TOL) -> RichardsonSolution:
    """Solve the Richardson equations at coupling ``g`` by continuation from g = 0.

    Parameters
    ----------
    levels : LevelSet
        Levels, blocked set and number of pairs.
    g : float
        Target coupling (> 0).
    seed : sequence of int, optional
        Level indices the rapidities emerge from as ``g -> 0``; defaults to
        the ``n_pairs`` lowest unblocked levels, which gives the ground state.
    tol : float
        Largest accepted residual of the returned solution.

    Raises
    ------
    ContinuationError
        When the branch cannot be followed; ``last_g`` and
        ``last_rapidities`` hold the last converged point.
    CriticalCouplingError
        When ``g`` sits on a rapidity collision.
    """
    if not (math.isfinite(g) and g > 0):
        raise ValueError(f"g must be positive, got {g}")
    seed = levels.ground_seed() if seed is None else tuple(int(i) for i in seed)
    if len(seed) != levels.n_pairs:
        raise ValueError(f"seed has {len(seed)} levels, expected n_pairs={levels.n_pairs}")
    if len(set(seed)) != len(seed) or any(i in levels.blocked for i in seed):
        raise ValueError("seed levels must be distinct and unblocked")
    if any(not 0 <= i < len(levels.energies) for i in seed):
        raise ValueError("seed index out of range")
    n = levels.n_pairs
    if n == 0:
        return RichardsonSolution(levels, g, (), np.empty(0, complex), 0.0, ())

    pair_e = _cluster(2.0 * levels.energies)
    poles = pair_e[levels.free]
    seed_poles = pair_e[list(seed)]
    g0 = min(g, G_START)

    d = np.empty(n, complex)
    for value in np.unique(seed_poles):
        members = np.flatnonzero(seed_poles == value)
        mult = int(np.sum(poles == value))
        d[members] = g0 * _laguerre_weights(len(members), mult)
    tracker = _Tracker(poles, seed_poles)
    d, ok, _ = _newton(d, poles, seed_poles, g0)
    if not ok:
        raise ContinuationError(f"could not start continuation at g={g0}", g0, tracker.rapidities(d))

    trace = [(g0, tracker.rapidities(d))]

    def record(gv, dv):
        if np.isreal(gv):
            trace.append((float(np.real(gv)), tracker.rapidities(dv)))

    if max_detours is None:
        max_detours = 4 * n + 10
    detours = 0
    s, s_end = math.log(g0), math.log(g)
    while s < s_end:
        d, s_stall, ok, hist = tracker.follow(np.exp, d, s, s_end, 0.3, record)
        if ok:
            break
        detours += 1
        g_stall = math.exp(s_stall)
        if detours > max_detours:
            raise ContinuationError(f"too many rapidity collisions before g={g}",
                                    g_stall, tracker.rapidities(d))
        back = [(t, dd) for t, dd in hist if t <= s_stall - math.log(1.2)]
        s_a, d = back[-1] if back else hist[0]
        ga = math.exp(s_a)
        gb = min(1.2 * g_stall, g)

        def arc(t, ga=ga, gb=gb):
            return ga + (gb - ga) * t + 0.5j * (gb - ga) * math.sin(math.pi * t)

        d, t_reached, ok, _ = tracker.follow(arc, d, 0.0, 1.0, 0.02)
        if not ok:
            if gb == g and t_reached > 0.9:
                raise CriticalCouplingError(f"g={g} is (close to) a rapidity collision point", g)
            raise ContinuationError(f"detour around g={g_stall:.6g} failed",
                                    float(np.real(arc(t_reached))), tracker.rapidities(d))
        trace.append((gb, tracker.rapidities(d)))
        s = math.log(gb)

    d = _canonicalize(d, poles, seed_poles, g)
    r, _ = _system(d, poles, seed_poles, g)
    res = float(np.max(np.abs(r)))
    if res > tol:
        raise ContinuationError(f"final residual {res:.3g} above tolerance", g, tracker.rapidities(d))
    e, _ = _pair_conjugates(tracker.rapidities(d))
    order = np.lexsort((e.imag, e.real))
    return RichardsonSolution(levels, float(g), seed, e[order], res, tuple(trace), detours)


def _canonicalize(d, poles, seed_poles, g):
    """Make real rapidities exactly real and complex ones exact conjugate pairs."""
    d = _symmetrize(d, seed_poles)
    r, _ = _system(d, poles, seed_poles, g)
    if np.max(np.abs(r)) > NEWTON_TOL:
        polished, ok, _ = _newton(d, poles, seed_poles, g)
        if ok:
            d = _symmetrize(polished, seed_poles)
    return d


def _pair_conjugates(e):
    """Snap near-real values onto the axis and match the rest into exact conjugate pairs."""
    scale = max(1.0, float(np.max(np.abs(e))))
    tiny = np.abs(e.imag) <= 1e-9 * scale
    out = e.copy()
    out[tiny] = out[tiny].real
    rest = list(np.flatnonzero(~tiny))
    while rest:
        i = rest.pop(0)
        j = min(rest, key=lambda k: abs(e[k] - np.conj(e[i])), default=None)
        if j is None:
            break
        rest.remove(j)
        a = 0.5 * (e[i] + np.conj(e[j]))
        out[i], out[j] = a, np.conj(a)
    return out, tiny


def _symmetrize(d, seed_poles):
    out, tiny = _pair_conjugates(seed_poles - d)
    dn = seed_poles - out
    # real rapidities keep their offsets, which are exact near the poles
    dn[tiny] = d[tiny].real
    return dn


def equation_residuals(rapidities, levels: LevelSet, g: float) -> np.ndarray:
    """Residuals evaluated directly on rapidities (no offset trick)."""
    e = np.asarray(rapidities, dtype=complex)
    poles = 2.0 * levels.energies[levels.free]
    diff = e[None, :] - e[:, None]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    return 1.0 + 2.0 * g * inv.sum(axis=1) - g * np.sum(1.0 / (poles[None, :] - e[:, None]), axis=1)


def total_energy(solution: RichardsonSolution, levels: Optional[LevelSet] = None) -> float:
    """``sum_{i in B} E_i + sum_nu Re(e_nu)`` for a converged solution."""
    if levels is not None and levels is not solution.levels:
        if (levels.blocked != solution.levels.blocked
                or not np.array_equal(levels.energies, solution.levels.energies)):
            raise ValueError("levels do not match the solution")
    if not solution.residual_norm <= RESIDUAL_TOL:
        raise ValueError(f"unconverged solution (residual {solution.residual_norm:.3g})")
    return solution.total_energy


def count_states(n_levels: int, n_pairs: int, n_blocked: int = 0) -> int:
    """Number of eigenstates with ``n_pairs`` pairs and ``n_blocked`` blocked levels."""
    if not 0 <= n_pairs <= n_levels - n_blocked:
        raise ValueError("need 0 <= n_pairs <= n_levels - n_blocked")
    return math.comb(n_levels - n_blocked, n_pairs)


def enumerate_states(levels: LevelSet, g: float) -> list[RichardsonSolution]:
    """One solution per distinct seed configuration.

    For non-degenerate levels this is every eigenstate of the sector. Seeds
    that differ only by swapping degenerate levels start on the same branch,
    so they are counted once and the list is then shorter than the sector.
    """
    pair_e = _cluster(2.0 * levels.energies)
    seen = set()
    out = []
    for seed in itertools.combinations(levels.free.tolist(), levels.n_pairs):
        key = tuple(sorted(pair_e[list(seed)].tolist()))
        if key not in seen:
            seen.add(key)
            out.append(solve_richardson(levels, g, seed))
    return out


# -- spectroscopic gap -------------------------------------------------------

@dataclass(frozen=True)
class GapResult:
    gap: float
    ground_energy: float
    excited_energy: float
    blocked: tuple


def fermi_window(n_levels: int, n_pairs: int, width: int = 4) -> list[int]:
    """The ``width`` level indices nearest the uncorrelated Fermi level.

    With ``2 n_pairs`` particles the Fermi level lies between levels
    ``n_pairs - 1`` and ``n_pairs`` (0-based); ties go to the lower index.
    """
    mid = n_pairs - 0.5
    idx = sorted(range(n_levels), key=lambda i: (abs(i - mid), i))
    return sorted(idx[:width])


def spectroscopic_gap(energies, n_pairs: int, g: float, window: int = 4,
                      return_details: bool = False, tol: float = RESIDUAL_TOL):
    """Pair-breaking energy ``E(n_p - 1 pairs, 2 blocked) - E(n_p pairs, none blocked)``.

    The two blocked levels are the lowest-energy choice among pairs drawn from
    the ``window`` levels nearest the Fermi level.
    """
    if isinstance(energies, LevelSet):
        energies = energies.energies
    energies = np.asarray(energies, dtype=float)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if n_pairs + 1 > len(energies):
        raise ValueError(f"n_pairs={n_pairs} needs at least {n_pairs + 1} levels")
    try:
        ground = solve_richardson(LevelSet(energies, (), n_pairs), g, tol=tol).total_energy
    except RichardsonError as exc:
        raise type(exc)(f"ground state n_pairs={n_pairs}, g={g}: {exc}") from exc
    best = None
    for pair in itertools.combinations(fermi_window(len(energies), n_pairs, window), 2):
        try:
            val = solve_richardson(LevelSet(energies, pair, n_pairs - 1), g, tol=tol).total_energy
        except RichardsonError as exc:
            raise type(exc)(f"n_pairs={n_pairs - 1}, blocked={pair}, g={g}: {exc}") from exc
        if best is None or val < best[0]:
            best = (val, pair)
    res = GapResult(best[0] - ground, ground, best[0], best[1])
    return res if return_details else res.gap


@dataclass(frozen=True)
class GapRow:
    position: Optional[int]
    n_pairs: int
    g: float
    gap: float
    enhancement: float
    blocked: tuple = ()
    error: str = ""


def _gap_point(args):
    spec, n_pairs, g, tol = args
    levels = graph_spectrum(build_chain(spec)).energies
    pos = spec.attach_pos if spec.side_sites else None
    try:
        r = spectroscopic_gap(levels, n_pairs, g, return_details=True, tol=tol)
    except RichardsonError as exc:
        return GapRow(pos, n_pairs, g, math.nan, math.nan, (), str(exc))
    return GapRow(pos, n_pairs, g, r.gap, math.nan, r.blocked)


def gap_sweep(total_sites: int, n_pairs_list: Sequence[int], g_values: Sequence[float],
              side_sites: int = 1, positions: Optional[Sequence[int]] = None,
              workers: int = 1, tol: float = RESIDUAL_TOL) -> list[GapRow]:
    """Spectroscopic gap for every (position, n_p, g) of a lateral-site family.

    ``enhancement`` on each row is the gap divided by the plain-chain gap of
    the same (n_p, g); its maximum over positions is the enhancement factor.
    Failed points keep ``gap = nan`` and carry the error text.
    """
    if positions is None:
        positions = range(1, total_sites - side_sites + 1)
    specs = [ChainSpec(total_sites, side_sites, n).validate() for n in positions]
    keys = [(int(p), float(g)) for p in n_pairs_list for g in g_values]
    ref_jobs = [(ChainSpec(total_sites), p, g, tol) for p, g in keys]
    jobs = [(s, p, g, tol) for s in specs for p, g in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            refs = list(pool.map(_gap_point, ref_jobs))
            rows = list(pool.map(_gap_point, jobs))
    else:
        refs = [_gap_point(j) for j in ref_jobs]
        rows = [_gap_point(j) for j in jobs]
    ref = {(r.n_pairs, r.g): r.gap for r in refs}
    out = []
    for r in rows:
        out.append(GapRow(r.position, r.n_pairs, r.g, r.gap, r.gap / ref[(r.n_pairs, r.g)],
                          r.blocked, r.error))
    return out


def enhancement_factors(rows: Sequence[GapRow]) -> dict:
    """Max over positions of the gap ratio, keyed by (n_pairs, g)."""
    out: dict = {}
    for r in rows:
        if math.isfinite(r.enhancement):
            k = (r.n_pairs, r.g)
            out[k] = max(out.get(k, -math.inf), r.enhancement)
    return out


def solution_record(sol: RichardsonSolution) -> dict:
    """JSON-ready summary of one solution, for debugging."""
    return {
        "g": sol.g,
        "n_pairs": sol.levels.n_pairs,
        "blocked": list(sol.levels.blocked),
        "seed": list(sol.seed),
        "rapidities": [[float(z.real), float(z.imag)] for z in sol.rapidities],
        "residual": sol.residual_norm,
        "trace_length": len(sol.continuation_trace),
        "detours": sol.detours,
        "total_energy": sol.total_energy,
    }


def write_gap_csv(rows: Sequence[GapRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "n_pairs", "g_K", "gap_K", "enhancement", "blocked", "error"])
        for r in rows:
            w.writerow(["" if r.position is None else r.position, r.n_pairs, repr(r.g),
                        repr(r.gap), repr(r.enhancement),
                        " ".join(str(i + 1) for i in r.blocked), r.error])
