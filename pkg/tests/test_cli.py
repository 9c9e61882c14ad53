import hashlib
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from graphbcs.cli import main
from graphbcs.config import ConfigError, RunConfig, load_config, parse_grid


def run_cli(tmp_path, *args):
    return main(list(args) + ["--output-dir", str(tmp_path), "--workers", "1"])


def manifest(tmp_path):
    return json.loads((tmp_path / "manifest.json").read_text())


def test_spectrum(tmp_path):
    assert run_cli(tmp_path, "spectrum", "--chain", "N=5") == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,energy_K" and len(lines) == 6
    m = manifest(tmp_path)
    data = (tmp_path / "spectrum.csv").read_bytes()
    assert m["outputs"]["spectrum.csv"] == hashlib.sha256(data).hexdigest()
    assert m["config"]["chain"] == 5 and m["status"] == "ok"


@pytest.mark.parametrize("cmd,extra,expect", [
    ("twobody", ["--g", "0.05"], ["twobody_g0.05.csv", "wavefunction_g0.05_state0.csv"]),
    ("dos", ["--g", "0.05"], ["dos_g0.05.csv"]),
    ("pdist", ["--g", "0.01", "--states", "0,1"], ["pdist_g0.01.csv"]),
    ("coherence", ["--g", "0,0.1"], ["coherence.csv"]),
    ("sweep-depairing", ["--side-sites", "1", "--g", "0.01"], ["depairing.csv"]),
    ("richardson-gap", ["--np", "1,3", "--g", "0.01"], ["richardson_gap.csv", "solutions.json"]),
    ("gap-sweep", ["--side-sites", "1", "--np", "2", "--g", "0.01"], ["gap_sweep.csv", "enhancement.csv"]),
    ("occupations", ["--np", "4", "--g", "0,0.1"], ["occupations_np4_g0.1.csv", "occupation_fits.csv"]),
    ("bcs-fit", ["--np", "4", "--g-grid", "0.01:0.1:4"], ["bcs_fit_np4.csv", "bcs_fit_polynomial.csv"]),
    ("bcs-fit", ["--side-sites", "1", "--np", "4", "--g", "0.01"], ["bcs_position_np4_g0.01.csv"]),
])
def test_every_command_writes_outputs(tmp_path, cmd, extra, expect):
    assert run_cli(tmp_path, cmd, "--chain", "9", *extra) == 0
    for name in expect:
        assert (tmp_path / name).exists(), name
    assert set(expect) <= set(manifest(tmp_path)["outputs"])


def test_pdist_columns(tmp_path):
    run_cli(tmp_path, "pdist", "--chain", "6", "--g", "0.1", "--states", "0,1")
    rows = (tmp_path / "pdist_g0.1.csv").read_text().splitlines()
    assert rows[0] == "r_hops,P_state0,P_state1"
    assert sum(float(r.split(",")[1]) for r in rows[1:]) == pytest.approx(1.0)


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run_cli(d, "gap-sweep", "--chain", "10", "--side-sites", "1", "--np", "1,3", "--g", "0.01")
    for name in ("gap_sweep.csv", "enhancement.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_json_format(tmp_path):
    run_cli(tmp_path, "spectrum", "--chain", "3", "--format", "json")
    data = json.loads((tmp_path / "spectrum.json").read_text())
    assert data[0]["index"] == 1 and isinstance(data[0]["energy_K"], float)


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\ncommand = spectrum\nchain = 7\nformat = json\n")
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--chain", "4", "--output-dir", str(out)]) == 0
    assert len(json.loads((out / "spectrum.json").read_text())) == 4


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GRAPHBCS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["spectrum", "--chain", "3"]) == 0
    assert (tmp_path / "env" / "spectrum.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    assert run_cli(tmp_path, "gap-sweep", "--chain", "40", "--side-sites", "1", "--attach", "40",
                   "--np", "1", "--g", "0.01") == 2
    assert "attach_pos out of range 1..39" in capsys.readouterr().err
    assert not (tmp_path / "manifest.json").exists()


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    import graphbcs.richardson as r

    def boom(*a, **k):
        raise r.ContinuationError("forced")

    monkeypatch.setattr(r, "solve_richardson", boom)
    assert run_cli(tmp_path, "gap-sweep", "--chain", "8", "--side-sites", "1", "--attach", "2,3",
                   "--np", "2", "--g", "0.01") == 3
    m = manifest(tmp_path)
    assert m["status"] == "partial" and len(m["failed_points"]) == 2
    lines = (tmp_path / "gap_sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and "nan" in lines[1]


@pytest.mark.parametrize("body,message", [
    ("command = gap-sweep\nchain = 40\nside_sites = 1\nattach = 40\nnp = 1\ng = 0.01\n",
     "attach_pos out of range 1..39"),
    ("command = spectrum\nchain = 40\nside_sites = 1\nattach = 20\nperiodic = true\n",
     "periodic boundary requires m=0"),
])
def test_validate_reports_errors(tmp_path, capsys, body, message):
    p = tmp_path / "c.ini"
    p.write_text("[run]\n" + body.replace("np =", "n_pairs ="))
    assert main(["validate", str(p)]) == 2
    assert message in capsys.readouterr().out


def test_validate_ok(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[run]\ncommand = gap-sweep\nchain = 40\nside_sites = 1\n"
                 "n_pairs = 1,4,7,10,13\ng = 0.01\n")
    assert main(["validate", str(p)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_lists_every_problem(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[run]\ncommand = richardson-gap\nchain = 10\nkind = xy\nformat = xml\n"
                 "workers = 0\nn_pairs = 12\ng = -1\n")
    assert main(["validate", str(p)]) == 2
    out = capsys.readouterr().out
    for frag in ("kind", "format", "workers", "n_p=12", "g > 0"):
        assert frag in out


def test_validate_ill_formed(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("no section here\n")
    assert main(["validate", str(p)]) == 2
    assert main(["validate", str(tmp_path / "missing.ini")]) == 2


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_ini("[run]\ncommand = spectrum\nbogus = 1\n")


def test_graph_file_input(tmp_path):
    g = tmp_path / "star.edges"
    g.write_text("# N 4\n1 2\n1 3\n1 4\n")
    assert run_cli(tmp_path, "spectrum", "--graph", str(g)) == 0
    vals = [float(l.split(",")[1]) for l in (tmp_path / "spectrum.csv").read_text().splitlines()[1:]]
    assert vals[0] == pytest.approx(-3 ** 0.5)


def test_parse_grid():
    assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        parse_grid("0:1")


floats = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["spectrum", "gap-sweep", "bcs-fit"]), st.integers(2, 60),
       st.integers(0, 3), st.lists(st.integers(1, 50), max_size=3),
       st.booleans(), st.lists(floats, max_size=4), st.lists(st.integers(0, 20), max_size=3),
       st.sampled_from(["bcs", "hubbard"]), st.floats(1e-14, 1.0), st.integers(1, 8),
       st.sampled_from(["csv", "json"]), st.one_of(st.none(), st.just("0.001:0.3:40")))
def test_config_round_trip(command, chain, m, attach, periodic, g, n_pairs, kind, tol, workers,
                           fmt, grid):
    cfg = RunConfig(command=command, chain=chain, side_sites=m, attach=tuple(attach),
                    periodic=periodic, g=tuple(g), g_grid=grid, n_pairs=tuple(n_pairs), kind=kind,
                    tolerance=tol, workers=workers, format=fmt, output_dir="out")
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


def test_round_trip_with_graph(tmp_path):
    cfg = RunConfig(command="spectrum", chain=None, graph="x.edges", output_dir="o")
    p = tmp_path / "c.ini"
    p.write_text(cfg.to_ini())
    assert load_config(p) == cfg


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "graphbcs.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.1.0"
