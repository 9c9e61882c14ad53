"""Run configuration: a flat ``[run]`` INI section mirrored by CLI flags."""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .graph import Boundary, ChainSpec, GraphError, read_edge_list

COMMANDS = ("spectrum", "twobody", "sweep-depairing", "dos", "pdist", "coherence",
            "richardson-gap", "gap-sweep", "occupations", "bcs-fit")
SWEEP_COMMANDS = ("sweep-depairing", "gap-sweep")
FAMILY_COMMANDS = SWEEP_COMMANDS + ("bcs-fit",)
NEEDS_PAIRS = ("richardson-gap", "gap-sweep", "occupations", "bcs-fit")
NEEDS_G = ("twobody", "sweep-depairing", "dos", "pdist", "coherence",
           "richardson-gap", "gap-sweep", "occupations", "bcs-fit")
POSITIVE_G = ("richardson-gap", "gap-sweep", "bcs-fit")
OUTPUT_ENV = "GRAPHBCS_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def parse_chain(text: str) -> int:
    """Accept ``40`` or ``N=40``."""
    t = text.strip()
    if t.upper().startswith("N="):
        t = t[2:]
    return int(t)


def parse_float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def parse_int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def parse_grid(text: str) -> tuple:
    """``a:b:n`` -> n evenly spaced values from a to b inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like a:b:n, got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("grid needs n >= 1")
    if n == 1:
        return (a,)
    return tuple(a + (b - a) * k / (n - 1) for k in range(n))


def _fmt_list(values) -> str:
    return ",".join(repr(v) if isinstance(v, float) else str(v) for v in values)


@dataclass(frozen=True)
class RunConfig:
    command: str
    chain: Optional[int] = 40
    side_sites: int = 0
    attach: tuple = ()
    periodic: bool = False
    graph: Optional[str] = None
    g: tuple = ()
    g_grid: Optional[str] = None
    n_pairs: tuple = ()
    kind: str = "bcs"
    states: tuple = (0,)
    bin_width: float = 0.05
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "."))
    format: str = "csv"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    tolerance: float = 1e-10

    # -- derived -----------------------------------------------------------
    @property
    def g_values(self) -> tuple:
        vals = tuple(self.g)
        if self.g_grid:
            vals += parse_grid(self.g_grid)
        return vals

    def chain_specs(self) -> list[ChainSpec]:
        """One spec per requested attachment point (all of them for sweeps)."""
        boundary = Boundary.PERIODIC if self.periodic else Boundary.OPEN
        if self.side_sites == 0:
            return [ChainSpec(self.chain, 0, None, boundary)]
        attach = self.attach
        if not attach and self.command in FAMILY_COMMANDS:
            attach = tuple(range(1, self.chain - self.side_sites + 1))
        if not attach:
            return [ChainSpec(self.chain, self.side_sites, None, boundary)]
        return [ChainSpec(self.chain, self.side_sites, a, boundary) for a in attach]

    # -- validation --------------------------------------------------------
    def problems(self) -> list[str]:
        out = []
        if self.command not in COMMANDS:
            out.append(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.graph is not None:
            if self.side_sites or self.attach or self.periodic:
                out.append("graph file cannot be combined with side_sites/attach/periodic")
            if self.command in SWEEP_COMMANDS:
                out.append(f"{self.command} needs a chain family, not a graph file")
            try:
                n_sites = read_edge_list(self.graph).n_sites
            except OSError as exc:
                out.append(f"cannot read graph file: {exc}")
                n_sites = None
            except GraphError as exc:
                out += [f"graph file: {p}" for p in exc.problems]
                n_sites = None
        elif self.chain is None:
            out.append("either chain or graph is required")
            n_sites = None
        else:
            n_sites = self.chain
            if len(self.attach) > 1 and self.command not in FAMILY_COMMANDS:
                out.append(f"{self.command} takes a single attach position")
            seen = set()
            for spec in self.chain_specs():
                for p in spec.problems():
                    if p not in seen:
                        seen.add(p)
                        out.append(p)
        try:
            gs = self.g_values
        except ValueError as exc:
            out.append(str(exc))
            gs = ()
        if self.command in NEEDS_G and not gs:
            out.append(f"{self.command} needs at least one g value")
        for g in gs:
            if not math.isfinite(g):
                out.append(f"g must be finite, got {g}")
            elif self.command in POSITIVE_G and g <= 0:
                out.append(f"{self.command} needs g > 0, got {g}")
            elif self.command == "occupations" and g < 0:
                out.append(f"occupations needs g >= 0, got {g}")
        if self.command in NEEDS_PAIRS:
            if not self.n_pairs:
                out.append(f"{self.command} needs at least one n_p value")
            if n_sites is not None:
                top = n_sites if self.command == "occupations" else n_sites - 1
                for p in self.n_pairs:
                    if not 1 <= p <= top:
                        out.append(f"n_p={p} out of range 1..{top}")
        if self.kind not in ("bcs", "hubbard"):
            out.append(f"kind must be bcs or hubbard, got {self.kind!r}")
        if n_sites is not None:
            for k in self.states:
                if not 0 <= k < n_sites * (n_sites + 1) // 2:
                    out.append(f"state index {k} out of range")
        if not self.bin_width > 0:
            out.append("bin_width must be > 0")
        if self.format not in ("csv", "json"):
            out.append(f"format must be csv or json, got {self.format!r}")
        if self.workers < 1:
            out.append("workers must be >= 1")
        if not self.tolerance > 0:
            out.append("tolerance must be > 0")
        return out

    def validate(self) -> "RunConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("attach", "g", "n_pairs", "states"):
            d[k] = list(d[k])
        return d

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        sec = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                sec[f.name] = _fmt_list(v)
            elif isinstance(v, bool):
                sec[f.name] = "true" if v else "false"
            elif isinstance(v, float):
                sec[f.name] = repr(v)
            else:
                sec[f.name] = str(v)
        cp["run"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([f"ill-formed config: {exc}"]) from exc
        if "run" not in cp:
            raise ConfigError(["config needs a [run] section"])
        return cls.from_mapping(dict(cp["run"]))

    @classmethod
    def from_mapping(cls, m: dict, base: Optional["RunConfig"] = None) -> "RunConfig":
        """Build from string values; unknown keys and bad values are all reported."""
        known = {f.name for f in fields(cls)}
        problems = [f"unknown key {k!r}" for k in m if k not in known]
        kw = {}
        parsers = {
            "chain": parse_chain, "side_sites": int, "attach": parse_int_list,
            "periodic": _parse_bool, "graph": str, "g": parse_float_list, "g_grid": str,
            "n_pairs": parse_int_list, "kind": str, "states": parse_int_list,
            "bin_width": float, "output_dir": str, "format": str, "workers": int,
            "tolerance": float, "command": str,
        }
        for k, v in m.items():
            if k not in known or v is None:
                continue
            try:
                kw[k] = parsers[k](v) if isinstance(v, str) else v
            except ValueError as exc:
                problems.append(f"{k}: {exc}")
        if problems:
            raise ConfigError(problems)
        if base is not None:
            return replace(base, **kw)
        if "command" not in kw:
            raise ConfigError(["command is required"])
        if "graph" in kw and "chain" not in kw:
            kw["chain"] = None
        return cls(**kw)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    return RunConfig.from_ini(text)
