"""``graphbcs`` command line: one subcommand per computation, CSV or JSON out.

Every run writes its tables into ``--output-dir`` and finishes with a
``manifest.json`` holding the configuration, timing, SHA-256 of each output
and any sweep points that failed. Exit status: 0 success, 2 configuration
error, 3 solver failure (including partially failed sweeps).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import COMMANDS, OUTPUT_ENV, ConfigError, RunConfig, load_config
from .graph import QuantumGraph, build_chain, read_edge_list, shortest_path_distances
from .manybody import (bcs_fit_sweep, bcs_v2, fit_bcs, fit_polynomial, ground_occupations,
                       position_sweep)
from .richardson import (LevelSet, RichardsonError, enhancement_factors, gap_sweep,
                         solution_record, solve_richardson, spectroscopic_gap)
from .spectral import graph_spectrum
from .twobody import (SYMMETRIC, Interaction, InteractionKind, assemble, coherence_length,
                      depairing_sweep, dos_histogram, pair_distance_distribution, solve)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


@dataclass
class Table:
    name: str
    columns: Sequence[str]
    rows: list = field(default_factory=list)


@dataclass
class RunResult:
    tables: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(table: Table, fmt: str) -> bytes:
    if fmt == "json":
        data = [{c: _json_cell(v) for c, v in zip(table.columns, row)} for row in table.rows]
        return (json.dumps(data, indent=1) + "\n").encode()
    lines = [",".join(table.columns)]
    lines += [",".join(_cell(v) for v in row) for row in table.rows]
    return ("\n".join(lines) + "\n").encode()


def _tag(g: float) -> str:
    return f"g{g!r}"


def _graph(cfg: RunConfig) -> QuantumGraph:
    if cfg.graph is not None:
        return read_edge_list(cfg.graph)
    return build_chain(cfg.chain_specs()[0])


def _levels(cfg: RunConfig) -> np.ndarray:
    return graph_spectrum(_graph(cfg)).energies


# -- commands ----------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> RunResult:
    e = _levels(cfg)
    return RunResult([Table("spectrum", ["index", "energy_K"],
                            [[i, float(x)] for i, x in enumerate(e, 1)])])


def _twobody(cfg: RunConfig, g: float):
    graph = _graph(cfg)
    return graph, solve(assemble(graph, Interaction(InteractionKind(cfg.kind), g)))


def cmd_twobody(cfg: RunConfig) -> RunResult:
    out = RunResult()
    for g in cfg.g_values:
        graph, sol = _twobody(cfg, g)
        rows = [["symmetric", i, float(x)] for i, x in enumerate(sol.sym_energies)]
        rows += [["antisymmetric", i, float(x)] for i, x in enumerate(sol.anti_energies)]
        out.tables.append(Table(f"twobody_{_tag(g)}", ["sector", "index", "energy_K"], rows))
        for k in cfg.states:
            prob = np.abs(sol.wavefunction(k, SYMMETRIC)) ** 2
            n = graph.n_sites
            out.tables.append(Table(
                f"wavefunction_{_tag(g)}_state{k}", ["i", "j", "abs_phi_sq"],
                [[i + 1, j + 1, float(prob[i, j])] for i in range(n) for j in range(n)]))
    return out


def cmd_dos(cfg: RunConfig) -> RunResult:
    out = RunResult()
    for g in cfg.g_values:
        _, sol = _twobody(cfg, g)
        h = dos_histogram(sol, cfg.bin_width)
        rows = [[float(h.edges[i]), float(h.edges[i + 1]), int(h.symmetric[i]),
                 int(h.antisymmetric[i]), int(h.total[i])] for i in range(len(h.symmetric))]
        out.tables.append(Table(f"dos_{_tag(g)}",
                                ["E_lo_K", "E_hi_K", "symmetric", "antisymmetric", "total"], rows))
    return out


def cmd_pdist(cfg: RunConfig) -> RunResult:
    out = RunResult()
    for g in cfg.g_values:
        graph, sol = _twobody(cfg, g)
        dist = shortest_path_distances(graph)
        ps = [pair_distance_distribution(sol.wavefunction(k), dist) for k in cfg.states]
        rmax = max(len(p) for p in ps)
        rows = [[r] + [float(p[r]) if r < len(p) else 0.0 for p in ps] for r in range(rmax)]
        out.tables.append(Table(f"pdist_{_tag(g)}",
                                ["r_hops"] + [f"P_state{k}" for k in cfg.states], rows))
    return out


def cmd_coherence(cfg: RunConfig) -> RunResult:
    rows = []
    for g in cfg.g_values:
        graph, sol = _twobody(cfg, g)
        dist = shortest_path_distances(graph)
        for k in cfg.states:
            xi = coherence_length(sol.wavefunction(k), dist)
            rows.append([g, k, xi, 1.0 / xi])
    return RunResult([Table("coherence", ["g_K", "state", "xi_C_sites", "inv_xi_C"], rows)])


def cmd_sweep_depairing(cfg: RunConfig) -> RunResult:
    positions = [s.attach_pos for s in cfg.chain_specs()] if cfg.side_sites else None
    rows = depairing_sweep(cfg.chain, cfg.side_sites, cfg.g_values, positions,
                           InteractionKind(cfg.kind), cfg.workers)
    table = Table("depairing", ["n", "g_K", "depairing_K", "xi_C_sites", "ground_K"],
                  [["" if r.position is None else r.position, r.g, r.depairing,
                    r.coherence_length, r.ground_energy] for r in rows])
    return RunResult([table])


def cmd_richardson_gap(cfg: RunConfig) -> RunResult:
    e = _levels(cfg)
    out = RunResult()
    rows, records = [], []
    for p in cfg.n_pairs:
        for g in cfg.g_values:
            try:
                r = spectroscopic_gap(e, p, g, return_details=True, tol=cfg.tolerance)
                sol = solve_richardson(LevelSet(e, (), p), g, tol=cfg.tolerance)
            except RichardsonError as exc:
                out.failures.append({"n_pairs": p, "g": g, "error": str(exc)})
                rows.append([p, g, math.nan, math.nan, math.nan, ""])
                continue
            rows.append([p, g, r.gap, r.ground_energy, r.excited_energy,
                         " ".join(str(i + 1) for i in r.blocked)])
            records.append(solution_record(sol))
    out.tables.append(Table("richardson_gap",
                            ["n_pairs", "g_K", "gap_K", "ground_K", "excited_K", "blocked"], rows))
    out.extra["solutions"] = records
    return out


def cmd_gap_sweep(cfg: RunConfig) -> RunResult:
    positions = [s.attach_pos for s in cfg.chain_specs()] if cfg.side_sites else None
    side = cfg.side_sites
    if side == 0:
        # plain chain: the sweep degenerates to one row per (n_p, g)
        e = _levels(cfg)
        out = RunResult()
        rows = []
        for p in cfg.n_pairs:
            for g in cfg.g_values:
                try:
                    gap = spectroscopic_gap(e, p, g, tol=cfg.tolerance)
                except RichardsonError as exc:
                    out.failures.append({"n_pairs": p, "g": g, "error": str(exc)})
                    gap = math.nan
                rows.append(["", p, g, gap, 1.0])
        out.tables.append(Table("gap_sweep", ["n", "n_pairs", "g_K", "gap_K", "enhancement"], rows))
        return out
    rows = gap_sweep(cfg.chain, cfg.n_pairs, cfg.g_values, side, positions,
                     cfg.workers, cfg.tolerance)
    out = RunResult()
    for r in rows:
        if r.error:
            out.failures.append({"n": r.position, "n_pairs": r.n_pairs, "g": r.g, "error": r.error})
    out.tables.append(Table("gap_sweep", ["n", "n_pairs", "g_K", "gap_K", "enhancement"],
                            [[r.position, r.n_pairs, r.g, r.gap, r.enhancement] for r in rows]))
    best = enhancement_factors(rows)
    out.tables.append(Table("enhancement", ["n_pairs", "g_K", "enhancement"],
                            [[p, g, best.get((p, g), math.nan)]
                             for p in cfg.n_pairs for g in cfg.g_values]))
    return out


def cmd_occupations(cfg: RunConfig) -> RunResult:
    e = _levels(cfg)
    out = RunResult()
    fits = []
    for p in cfg.n_pairs:
        for g in cfg.g_values:
            prof = ground_occupations(e, g, p)
            fit = fit_bcs(prof)
            v2 = bcs_v2(e, fit.mu, fit.delta)
            out.tables.append(Table(
                f"occupations_np{p}_{_tag(g)}", ["i", "E_i_K", "nu_i", "v2_fit"],
                [[i + 1, float(e[i]), float(prof.nu[i]), float(v2[i])] for i in range(len(e))]))
            fits.append([p, g, fit.mu, fit.delta, fit.rss, fit.constraint_gap, int(fit.degenerate)])
    out.tables.append(Table("occupation_fits", ["n_pairs", "g_K", "mu_K", "delta_K", "rss",
                                                "constraint_gap", "degenerate"], fits))
    return out


def cmd_bcs_fit(cfg: RunConfig) -> RunResult:
    out = RunResult()
    gs = cfg.g_values
    if cfg.graph is None and cfg.side_sites:
        positions = [s.attach_pos for s in cfg.chain_specs()]
        for p in cfg.n_pairs:
            for g in gs:
                try:
                    rows = position_sweep(cfg.chain, p, g, cfg.side_sites, positions)
                except RichardsonError as exc:
                    out.failures.append({"n_pairs": p, "g": g, "error": str(exc)})
                    continue
                out.tables.append(Table(f"bcs_position_np{p}_{_tag(g)}",
                                        ["n", "delta_fit_K", "delta_gap_K"],
                                        [[r.position, r.delta_fit, r.delta_gap] for r in rows]))
        return out
    e = _levels(cfg)
    coeffs = []
    for p in cfg.n_pairs:
        rows = bcs_fit_sweep(e, p, gs)
        out.tables.append(Table(f"bcs_fit_np{p}", ["g_K", "delta_K", "mu_K", "rss", "constraint_gap"],
                                [[r.g, r.delta, r.mu, r.rss, r.constraint_gap] for r in rows]))
        if len(gs) >= 3:
            a = fit_polynomial(gs, [r.delta for r in rows])
            coeffs.append([p] + [float(x) for x in a])
    if coeffs:
        out.tables.append(Table("bcs_fit_polynomial", ["n_pairs", "a1", "a2", "a3"], coeffs))
    return out


DISPATCH = {
    "spectrum": cmd_spectrum,
    "twobody": cmd_twobody,
    "sweep-depairing": cmd_sweep_depairing,
    "dos": cmd_dos,
    "pdist": cmd_pdist,
    "coherence": cmd_coherence,
    "richardson-gap": cmd_richardson_gap,
    "gap-sweep": cmd_gap_sweep,
    "occupations": cmd_occupations,
    "bcs-fit": cmd_bcs_fit,
}
assert set(DISPATCH) == set(COMMANDS)


# -- persistence -------------------------------------------------------------

def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig) -> dict:
    """Validate, compute, write outputs and the manifest; returns the manifest."""
    cfg.validate()
    start = time.time()
    result = DISPATCH[cfg.command](cfg)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    ext = "json" if cfg.format == "json" else "csv"
    checksums = {}
    for t in result.tables:
        data = render(t, cfg.format)
        name = f"{t.name}.{ext}"
        _atomic_write(outdir / name, data)
        checksums[name] = hashlib.sha256(data).hexdigest()
    if "solutions" in result.extra:
        data = (json.dumps(result.extra["solutions"], indent=1) + "\n").encode()
        _atomic_write(outdir / "solutions.json", data)
        checksums["solutions.json"] = hashlib.sha256(data).hexdigest()
    manifest = {
        "tool": "graphbcs",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "started_unix": start,
        "wall_clock_s": time.time() - start,
        "outputs": checksums,
        "failed_points": result.failures,
        "status": "partial" if result.failures else "ok",
    }
    _atomic_write(outdir / "manifest.json", (json.dumps(manifest, indent=1) + "\n").encode())
    return manifest


# -- argument parsing --------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="INI file with a [run] section; flags override it")
    p.add_argument("--chain", help="open chain size, e.g. N=40")
    p.add_argument("--side-sites", dest="side_sites", help="lateral sites m (0-3)")
    p.add_argument("--attach", help="1-based backbone node(s) carrying the lateral sites")
    p.add_argument("--periodic", action="store_const", const="true", help="close the chain into a ring")
    p.add_argument("--graph", help="edge-list file instead of a chain")
    p.add_argument("--g", help="comma-separated couplings in units of K")
    p.add_argument("--g-grid", dest="g_grid", help="a:b:n evenly spaced couplings")
    p.add_argument("--np", dest="n_pairs", help="comma-separated pair numbers")
    p.add_argument("--kind", help="bcs (default) or hubbard")
    p.add_argument("--states", help="symmetric-sector state indices, 0 = ground")
    p.add_argument("--bin-width", dest="bin_width", help="DOS bin width in K")
    p.add_argument("--output-dir", dest="output_dir",
                   help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--format", help="csv (default) or json")
    p.add_argument("--workers", help="parallel worker processes for sweeps")
    p.add_argument("--tolerance", help="largest accepted Richardson residual")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphbcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    v = sub.add_parser("validate", help="check a config file without computing")
    v.add_argument("config_path")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if "config" in vars(ns):
        base = load_config(ns.config)
        if base.command != ns.command:
            base = RunConfig.from_mapping({"command": ns.command}, base)
        return RunConfig.from_mapping(flags, base)
    return RunConfig.from_mapping({"command": ns.command, **flags})


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "validate":
        try:
            problems = load_config(ns.config_path).problems()
        except ConfigError as exc:
            problems = exc.problems
        if problems:
            for p in problems:
                print(f"error: {p}")
            return EXIT_CONFIG
        print("ok")
        return EXIT_OK
    try:
        cfg = config_from_args(ns)
        cfg.validate()
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg)
    except RichardsonError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for name in manifest["outputs"]:
        print(Path(cfg.output_dir) / name)
    for f in manifest["failed_points"]:
        print(f"failed point: {f}", file=sys.stderr)
    return EXIT_SOLVER if manifest["failed_points"] else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
