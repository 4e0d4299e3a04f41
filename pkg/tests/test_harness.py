import csv
import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracocp import cli, harness
from fracocp.control import OCPError
from fracocp.harness import (CSV_COLUMNS, PLOT_HEADER, ConfigError, RunConfig, clean_cache, emit_plot_data,
                             read_errors_csv, run_experiment)
from fracocp.manufactured import METRICS


def _write_cfg(path, **kw):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kw.items()))
    return path


# ---------------------------------------------------------------------------
# config


def test_config_from_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# sweep\ns_list = 0.4, 0.8\nschemes = semidiscrete\nmax_level = 3  # small\n"
                 "ocp_tol = 1e-9\nband_radius = 2.5\nseed = 7\n")
    cfg = RunConfig.from_file(p)
    assert cfg.s_list == (0.4, 0.8) and cfg.schemes == ("semidiscrete",)
    assert cfg.max_level == 3 and cfg.ocp_tol == 1e-9 and cfg.band_radius == 2.5 and cfg.seed == 7
    assert cfg.newton_tol == RunConfig().newton_tol


def test_config_defaults_cover_the_full_sweep():
    cfg = RunConfig()
    assert cfg.s_list == (0.2, 0.4, 0.6, 0.8)
    assert set(cfg.schemes) == {"fully_discrete", "semidiscrete"}
    assert len(cfg.s_list) * len(cfg.schemes) * len(METRICS) == 48


@pytest.mark.parametrize("text", [
    "s_list = 0.4, 1.0\n",
    "s_list = 0.0\n",
    "schemes = fully_discrete, spectral\n",
    "max_level = 6\n",  # 12097 DOFs, above the resource guard
    "min_level = 3\nmax_level = 2\n",
    "newton_tol = 0\n",
    "ocp_tol = -1e-3\n",
    "workers = 0\n",
    "band_radius = 0.9\n",
    "max_level = three\n",
    "colour = blue\n",
    "duffy_order_singular = 3\n",
    "s_list\n",
])
def test_config_errors(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        RunConfig.from_file(p)


def test_shipped_sweep_config_parses():
    from pathlib import Path
    cfg = RunConfig.from_file(Path(__file__).parents[1] / "configs" / "sweep.cfg")
    assert cfg.s_list == (0.2, 0.4, 0.6, 0.8) and cfg.max_level == 4
    assert cfg.quadrature() == RunConfig().quadrature()


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "nope.cfg")


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4), st.integers(1, 5))
def test_config_mapping_roundtrip(s_list, max_level):
    text = ", ".join(repr(s) for s in s_list)
    cfg = RunConfig.from_mapping({"s_list": text, "max_level": str(max_level)})
    assert cfg.s_list == tuple(s_list) and cfg.max_level == max_level


def test_cache_dir_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv("FRACOCP_CACHE_DIR", str(tmp_path))
    assert RunConfig().resolved_cache_dir() == tmp_path
    assert RunConfig(cache_dir="elsewhere").resolved_cache_dir().name == "elsewhere"


# ---------------------------------------------------------------------------
# sweep output


@pytest.fixture(scope="module")
def small_run(cache_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = RunConfig(s_list=(0.8,), max_level=3, cache_dir=str(cache_dir), output_dir=str(out))
    return cfg, run_experiment(cfg)


def test_sweep_writes_csv_pairs(small_run):
    cfg, res = small_run
    assert not res.failed
    names = sorted(p.name for p in res.files)
    assert names == ["diagnostics.csv", "eoc_fully_discrete_s0.8.csv", "eoc_semidiscrete_s0.8.csv",
                     "errors_fully_discrete_s0.8.csv", "errors_semidiscrete_s0.8.csv"]
    for scheme in cfg.schemes:
        with open(res.files[0].parent / f"errors_{scheme}_s0.8.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
        with open(res.files[0].parent / f"eoc_{scheme}_s0.8.csv", newline="") as fh:
            eoc_rows = list(csv.reader(fh))
        assert eoc_rows[0][:2] == ["level_coarse", "level_fine"] and len(eoc_rows) == 3


def test_sweep_errors_decrease(small_run):
    _, res = small_run
    for rec in res.records.values():
        assert rec.levels == [1, 2, 3] and rec.n_dofs == [7, 37, 169]
        for m in METRICS:
            e = rec.errors[m]
            assert all(math.isfinite(v) and v > 0 for v in e), m
            assert e[0] > e[1] > e[2], (rec.scheme, m, e)


def test_sweep_cells_converged(small_run):
    _, res = small_run
    for c in res.cells:
        assert c.residual <= 1e-10 and c.checks["sparsity"] and c.checks["box"]


def test_diagnostics_monitor_sup_norm(small_run):
    _, res = small_run
    with open(res.files[0].parent / "diagnostics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    for r in rows:
        assert int(r["iterations"]) >= 1 and float(r["stationarity"]) <= 1e-10
        assert r["sparsity"] == r["box"] == r["eta_range"] == r["eta_sign"] == "1"
    # max |u_h| stays bounded and approaches max |u| = c_s
    from fracocp.manufactured import c_s
    sup = [float(r["max_abs_u"]) for r in rows if r["scheme"] == "fully_discrete"]
    assert all(0 < v < 1.05 * c_s(0.8) for v in sup)
    assert abs(sup[-1] - c_s(0.8)) < abs(sup[0] - c_s(0.8))


def test_plot_data_rows(small_run):
    _, res = small_run
    text = emit_plot_data(res.records)
    rows = list(csv.reader(text.splitlines()))
    assert ",".join(rows[0]) == "scheme,s,level,h,metric,value"
    assert tuple(rows[0]) == PLOT_HEADER
    assert len(rows) - 1 == 2 * 1 * 3 * 6
    vals = [float(r[5]) for r in rows[1:]]
    assert all(math.isfinite(v) for v in vals)
    assert {r[4] for r in rows[1:]} == set(METRICS)


def test_errors_csv_roundtrip(small_run):
    _, res = small_run
    for (scheme, s), rec in res.records.items():
        path = res.files[0].parent / f"errors_{scheme}_s{s:g}.csv"
        back = read_errors_csv(path)
        assert (back.scheme, back.s, back.levels, back.n_dofs) == (scheme, s, rec.levels, rec.n_dofs)
        assert back.h == rec.h and back.errors == rec.errors


def test_warm_cache_skips_assembly(small_run, caplog):
    cfg, res = small_run
    with caplog.at_level(logging.INFO, logger="fracocp.assembly"):
        cell = harness.run_cell(cfg, "fully_discrete", 0.8, 3)
    assert "cache hit" in caplog.text
    assert cell.assembly_seconds < 1.0
    first = next(c for c in res.cells if c.scheme == "fully_discrete" and c.level == 3)
    assert cell.errors == first.errors


def test_rerun_is_byte_identical(small_run, tmp_path):
    cfg, res = small_run
    again = run_experiment(replace(cfg, max_level=2, output_dir=str(tmp_path)))
    twice = run_experiment(replace(cfg, max_level=2, output_dir=str(tmp_path / "b")))
    assert [p.read_bytes() for p in again.files] == [p.read_bytes() for p in twice.files]


def test_process_pool_matches_serial(cache_dir, tmp_path):
    base = RunConfig(s_list=(0.4,), max_level=2, cache_dir=str(cache_dir))
    serial = run_experiment(replace(base, output_dir=str(tmp_path / "serial")))
    pooled = run_experiment(replace(base, output_dir=str(tmp_path / "pool"), workers=2))
    assert [p.read_bytes() for p in serial.files] == [p.read_bytes() for p in pooled.files]


def test_failed_cell_is_recorded(cache_dir, tmp_path, monkeypatch):
    real = harness.solve_ocp

    def flaky(spec, mesh, ops, scheme, **kw):
        if mesh.level == 2:
            raise OCPError("forced failure")
        return real(spec, mesh, ops, scheme, **kw)
    monkeypatch.setattr(harness, "solve_ocp", flaky)
    cfg = RunConfig(s_list=(0.8,), schemes=("fully_discrete",), max_level=2,
                    cache_dir=str(cache_dir), output_dir=str(tmp_path))
    res = run_experiment(cfg)
    assert res.failed
    rec = res.records[("fully_discrete", 0.8)]
    assert rec.levels == [1] and rec.failures[0][0] == 2
    rows = list(csv.reader(open(tmp_path / "failures.csv")))
    assert rows[0] == ["scheme", "s", "level", "reason"]
    assert rows[1][:3] == ["fully_discrete", "0.8", "2"] and "forced failure" in rows[1][3]
    # partial results are still written
    assert (tmp_path / "errors_fully_discrete_s0.8.csv").exists()


# ---------------------------------------------------------------------------
# command line


def test_cli_run_and_plot_data(cache_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "c.cfg", s_list="0.8", max_level=2, cache_dir=cache_dir,
                     output_dir=tmp_path / "out")
    assert cli.main(["run", "--config", str(cfg), "--plot-data", str(tmp_path / "long.csv")]) == 0
    assert (tmp_path / "out" / "errors_semidiscrete_s0.8.csv").exists()
    assert len((tmp_path / "long.csv").read_text().splitlines()) == 1 + 2 * 2 * 6
    capsys.readouterr()
    assert cli.main(["plot-data", str(tmp_path / "out")]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "scheme,s,level,h,metric,value"


def test_cli_exit_codes(cache_dir, tmp_path, monkeypatch):
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = _write_cfg(tmp_path / "bad.cfg", max_level=9)
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["plot-data", str(tmp_path)]) == 2

    def broken(*a, **k):
        raise OCPError("no convergence")
    monkeypatch.setattr(harness, "solve_ocp", broken)
    cfg = _write_cfg(tmp_path / "c.cfg", s_list="0.8", schemes="semidiscrete", max_level=1,
                     cache_dir=cache_dir, output_dir=tmp_path / "out")
    assert cli.main(["run", "--config", str(cfg)]) == 1


def test_cli_assemble_and_clean_cache(tmp_path, capsys):
    cache = tmp_path / "cache"
    cfg = _write_cfg(tmp_path / "c.cfg", s_list="0.3, 0.7", max_level=1, cache_dir=cache)
    assert cli.main(["assemble-only", "--config", str(cfg)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2
    assert len(list(cache.glob("*.bin"))) == 2
    (cache / "notes.txt").write_text("keep")
    assert cli.main(["clean-cache", "--cache-dir", str(cache)]) == 0
    assert "removed 2" in capsys.readouterr().out
    assert [p.name for p in cache.iterdir()] == ["notes.txt"]
    assert clean_cache(tmp_path / "absent") == 0


def test_cli_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
    assert "run" in capsys.readouterr().out


def test_structure_checks_flag_violations(cache_dir):
    from fracocp.control import solve_ocp
    from fracocp.manufactured import build_benchmark
    cfg = RunConfig(cache_dir=str(cache_dir))
    mesh, dm, ops, _ = harness._operators(cfg, 0.8, 2)
    spec, _ = build_benchmark(0.8)
    st_ = solve_ocp(spec, mesh, ops, "fully_discrete", dofmap=dm)
    ok = harness.structure_checks(st_, spec, mesh, ops, dm)
    assert all(ok[k] for k in ("sparsity", "box", "eta_range", "eta_sign")) and ok["stationarity"] <= 1e-9
    bad = replace(st_, q=np.where(st_.q == 0, 1e-3, st_.q), eta=-np.asarray(st_.eta))
    chk = harness.structure_checks(bad, spec, mesh, ops, dm)
    assert not chk["sparsity"] and not chk["eta_sign"]
