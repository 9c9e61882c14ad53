"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a ``criterion k: PASS|FAIL  <measured values>`` line that
is printed at the end of the run (and immediately when the module is run as
a script).
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from graphbcs.graph import ChainSpec, build_chain, shortest_path_distances
from graphbcs.manybody import bcs_fit_sweep, fit_polynomial
from graphbcs.richardson import (LevelSet, count_states, enumerate_states, gap_sweep,
                                 solve_richardson, spectroscopic_gap)
from graphbcs.spectral import graph_spectrum
from graphbcs.twobody import (Interaction, assemble, bcs, coherence_length, depairing_sweep,
                              pair_distance_distribution, sector_pairs, solve, solve_lowest)
from oracles import product_basis_spectrum, reduced_bcs_spectrum


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def chain_levels(spec):
    return graph_spectrum(build_chain(spec)).energies


def interior_maxima(y):
    return [i + 1 for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] > y[i + 1]]


def test_criterion_01_bound_state_eigenvalue():
    t = time.perf_counter()
    sol = solve(assemble(build_chain(ChainSpec(40)), bcs(0.05)), vectors=False)
    elapsed = time.perf_counter() - t
    e0 = sol.sym_energies[0]
    ok = abs(e0 - (-4.44353)) <= 1e-4 and elapsed < 1.0
    report(1, ok, f"E0={e0:.6f} (target -4.44353 +-1e-4), runtime {elapsed:.3f}s (< 1s)")


def test_criterion_02_band_states():
    sol = solve(assemble(build_chain(ChainSpec(40)), bcs(0.05)), vectors=False)
    s1, a0 = sol.sym_energies[1], sol.anti_energies[0]
    ok = abs(s1 - (-3.97345)) <= 1e-4 and abs(a0 - (-3.97069)) <= 1e-4
    report(2, ok, f"second symmetric {s1:.6f} (-3.97345), lowest antisymmetric {a0:.6f} (-3.97069)")


def test_criterion_03_thermodynamic_closed_form():
    target = -math.sqrt(20.0)
    errs = {}
    for n in (20, 40, 80):
        graph = build_chain(ChainSpec(n, boundary="periodic"))
        errs[n] = abs(solve_lowest(assemble(graph, bcs(2.0 / n)), 1).ground_energy - target)
    ok = errs[20] > errs[40] > errs[80] and errs[40] / abs(target) < 0.01
    detail = ", ".join(f"N={n}: |err|={e:.2e}" for n, e in errs.items())
    report(3, ok, f"{detail}; N=40 relative {errs[40] / abs(target):.2e} (< 1%)")


def test_criterion_04_unique_bound_state():
    graph = build_chain(ChainSpec(40))
    counts = {}
    for g in (0.01, 0.05, 0.1):
        counts[g] = int(np.sum(solve(assemble(graph, bcs(g)), vectors=False).energies() < -4.0))
    above = int(np.sum(solve(assemble(graph, bcs(-0.05)), vectors=False).energies() > 4.0))
    ok = all(c == 1 for c in counts.values()) and above == 1
    report(4, ok, f"below -4K: {counts}; above +4K at g=-0.05: {above}")


def test_criterion_05_enhancement_ratios():
    gs = (0.005, 0.01, 0.015)
    rows = depairing_sweep(40, 1, gs, workers=1)
    chain = {r.g: r.depairing for r in depairing_sweep(40, 0, gs)}
    target = {0.005: 3.60, 0.01: 2.57, 0.015: 1.83}
    parts, ok = [], True
    for g in gs:
        d = np.array([r.depairing for r in rows if r.g == g])
        eta = d[19] / chain[g]
        peak = int(np.argmax(d)) + 1
        mirror = float(np.max(np.abs(d - d[::-1])))
        ok &= abs(eta - target[g]) <= 0.05 and peak == 20 and mirror <= 1e-9
        parts.append(f"eta({g})={eta:.4f} peak n={peak} mirror {mirror:.1e}")
    report(5, ok, "; ".join(parts))


def test_criterion_06_multi_side_site_maxima():
    g = 0.015
    chain = depairing_sweep(40, 0, [g])[0].depairing
    m2 = max(r.depairing for r in depairing_sweep(40, 2, [g]))
    m3 = max(r.depairing for r in depairing_sweep(40, 3, [g]))
    ok = abs(chain - 0.06) <= 0.01 and abs(m2 - 0.24) <= 0.01 and abs(m3 - 0.42) <= 0.01
    report(6, ok, f"chain {chain:.5f} (0.06), m=2 {m2:.5f} (0.24), m=3 {m3:.5f} (0.42), +-0.01")


def test_criterion_07_pair_distance_statistics():
    graph = build_chain(ChainSpec(40))
    dist = shortest_path_distances(graph)
    sol = solve(assemble(graph, bcs(0.01)))
    p_bound = pair_distance_distribution(sol.wavefunction(0), dist)[:4].sum()
    p_first = pair_distance_distribution(sol.wavefunction(1), dist)[:4].sum()
    strong = solve_lowest(assemble(graph, bcs(0.3)), 1)
    p0 = pair_distance_distribution(strong.ground_state, dist)[0]
    ok = abs(p_bound - 0.50) <= 0.02 and abs(p_first - 0.33) <= 0.02 and p0 >= 0.95
    report(7, ok, f"P(r<=3) bound {p_bound:.5f} (0.50+-0.02), first excited {p_first:.5f} "
                  f"(0.33+-0.02), P(0) at g=0.3 {p0:.5f} (>= 0.95)")


def test_criterion_08_richardson_matches_two_body():
    g = 0.01
    worst = 0.0
    for n in range(1, 40):
        spec = ChainSpec(40, 1, n)
        two = solve_lowest(assemble(build_chain(spec), bcs(g)), 2).depairing_energy
        worst = max(worst, abs(spectroscopic_gap(chain_levels(spec), 1, g) - two))
    report(8, worst <= 1e-8, f"max |Delta(1,0) - depairing| over n=1..39: {worst:.2e} (<= 1e-8)")


def test_criterion_09_richardson_matches_exact_diagonalization():
    worst = 0.0
    points = 0
    for n in range(2, 13):
        e = chain_levels(ChainSpec(n))
        for p in range(1, n // 2 + 1):
            for g in (0.001, 0.01, 0.1):
                sol = solve_richardson(LevelSet(e, (), p), g)
                worst = max(worst, abs(sol.total_energy - reduced_bcs_spectrum(e, g, p)[0]))
                points += 1
    count_ok = True
    for n, p, blocked in ((6, 3, ()), (7, 2, ()), (8, 3, (3, 4)), (7, 2, (0,))):
        e = chain_levels(ChainSpec(n))
        sols = enumerate_states(LevelSet(e, blocked, p), 0.1)
        free = np.delete(e, list(blocked))
        ref = reduced_bcs_spectrum(free, 0.1, p) + sum(e[list(blocked)])
        ours = np.sort([s.total_energy for s in sols])
        count_ok &= len(sols) == count_states(n, p, len(blocked)) == len(ref)
        count_ok &= bool(np.allclose(ours, ref, atol=1e-9))
    ok = worst <= 1e-9 and count_ok
    report(9, ok, f"{points} grid points, max |E_R - E_ED| = {worst:.2e} (<= 1e-9); "
                  f"state counts C(N-b,n_p) and full spectra {'match' if count_ok else 'MISMATCH'}")


def test_criterion_10_gap_structure_and_enhancement():
    structure = gap_sweep(40, [1, 4, 7, 10, 13], [0.01], side_sites=1)
    parts, ok = [], True
    for p in (1, 4, 7, 10, 13):
        d = np.array([r.gap for r in structure if r.n_pairs == p])
        peaks = interior_maxima(d)
        centre_max = d[19] > d[18] and d[19] > d[20]
        centre_min = d[19] < d[18] and d[19] < d[20]
        good = len(peaks) == p and (centre_max if p % 2 else centre_min)
        ok &= good
        parts.append(f"n_p={p}: {len(peaks)} maxima, n=20 {'max' if centre_max else 'min' if centre_min else '-'}")
    odd = [1, 3, 5, 7, 9, 11, 13, 15]
    gs = [0.005, 0.0075, 0.01]
    rows = gap_sweep(40, odd, gs, side_sites=1)
    worst = []
    for g in gs:
        for p in odd:
            e = max(r.enhancement for r in rows if r.n_pairs == p and r.g == g)
            if not 1.25 <= e <= 1.45:
                worst.append(f"n_p={p} g={g}: {e:.4f}")
                ok = False
    ens = [max(r.enhancement for r in rows if r.n_pairs == p and r.g == g) for g in gs for p in odd]
    parts.append(f"enhancement range over odd n_p 1..15 [{min(ens):.4f}, {max(ens):.4f}] "
                 f"(target [1.25, 1.45])")
    if worst:
        parts.append("outside: " + ", ".join(worst))
    report(10, ok, "; ".join(parts))


def test_criterion_11_bcs_fit_cubic():
    e = chain_levels(ChainSpec(11))
    gs = np.linspace(0.001, 0.3, 40)
    rows = bcs_fit_sweep(e, 5, gs)
    a = fit_polynomial(gs, [r.delta for r in rows])
    ref = np.array([0.6348, 1.840, 6.055])
    rel = np.abs(a / ref - 1)
    cgap = max(r.constraint_gap for r in rows)
    ok = bool(np.all(rel <= 0.05)) and cgap < 1e-6
    report(11, ok, f"a=({a[0]:.4f}, {a[1]:.4f}, {a[2]:.4f}) vs (0.6348, 1.840, 6.055), "
                   f"rel dev ({rel[0]:.3f}, {rel[1]:.3f}, {rel[2]:.3f}) (<= 0.05); "
                   f"max |sum v^2 - n_p| = {cgap:.2e} (< 1e-6)")


def test_criterion_12_coherence_length():
    parts, ok = [], True
    for n in (11, 40):
        graph = build_chain(ChainSpec(n))
        phi = solve_lowest(assemble(graph, bcs(0.0)), 1).ground_state
        inv = 1.0 / coherence_length(phi, shortest_path_distances(graph))
        ratio = inv / (2 * math.sqrt(3) / n)
        ok &= abs(ratio - 1) <= 0.02
        parts.append(f"N={n}: xi^-1 / (2 sqrt3 / N) = {ratio:.4f}")
    for g in (0.005, 0.015):
        side = depairing_sweep(40, 1, [g], [20])[0].coherence_length
        plain = depairing_sweep(40, 0, [g])[0].coherence_length
        ok &= side < plain
        parts.append(f"g={g}: xi(m=1,n=20)={side:.3f} < xi(chain)={plain:.3f}")
    report(12, ok, "; ".join(parts) + " (ratio within 2%)")


def test_criterion_13_property_suite():
    checks = {}
    graph = build_chain(ChainSpec(40))
    base = solve(assemble(graph, bcs(0.0)), vectors=False).anti_energies
    drift = max(float(np.max(np.abs(solve(assemble(graph, bcs(g)), vectors=False).anti_energies - base)))
                for g in np.linspace(0.0, 0.1, 11))
    checks["antisymmetric drift"] = (drift <= 1e-12, f"{drift:.1e}")

    dims = all(len(sector_pairs(n, True)) == n * (n + 1) // 2
               and len(sector_pairs(n, False)) == n * (n - 1) // 2 for n in range(1, 41))
    checks["sector dimensions"] = (dims, "N=1..40")

    sol = solve(assemble(build_chain(ChainSpec(40, 1, 13)), bcs(0.01)))
    dist = shortest_path_distances(sol.problem.graph)
    norm = 0.0
    for k in range(5):
        phi = sol.wavefunction(k)
        norm = max(norm, abs(np.sum(phi ** 2) - 1),
                   abs(pair_distance_distribution(phi, dist).sum() - 1))
    checks["normalization"] = (norm <= 1e-10, f"{norm:.1e}")

    res = 0.0
    e = chain_levels(ChainSpec(40, 1, 20))
    for p in range(1, 14):
        res = max(res, solve_richardson(LevelSet(e, (), p), 0.01).residual_norm,
                  solve_richardson(LevelSet(e, (p - 1, p), p - 1), 0.01).residual_norm)
    e = chain_levels(ChainSpec(12))
    for g in (0.5, 1.0, 2.0):
        res = max(res, solve_richardson(LevelSet(e, (), 6), g).residual_norm)
    checks["Richardson residuals"] = (res <= 1e-10, f"{res:.1e}")

    prod = 0.0
    for n in range(2, 9):
        specs = [ChainSpec(n)] + ([ChainSpec(n, 1, n // 2)] if n > 2 else [])
        for spec in specs:
            gr = build_chain(spec)
            for kind in ("hubbard", "bcs"):
                ours = solve(assemble(gr, Interaction(kind, 0.3)), vectors=False).energies()
                ref = product_basis_spectrum(gr.adjacency, gr.onsite, gr.hopping, 0.3, kind)
                prod = max(prod, float(np.max(np.abs(ours - ref))))
    checks["product-basis equivalence N<=8"] = (prod <= 1e-10, f"{prod:.1e}")

    ok = all(v[0] for v in checks.values())
    report(13, ok, "; ".join(f"{k} {'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in checks.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
