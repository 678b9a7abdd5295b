"""plotkit: loading validation, gap handling, deterministic rendering."""

import hashlib
import math
import os

import numpy as np
import pytest

from plotkit import (PANELS, PanelNameError, SchemaError, load_run, load_runs,
                     render_statistics_figure)
from plotkit.cli import main

COLUMNS = ("t,kinetic_energy,enstrophy,taylor_microscale,turbulence_intensity,"
           "k_avg,eps,eps_model,budget_residual,picard_iters")


def _write_csv(path, rows, label="run-a", drop_column=None, config_hash="c0ffee12" * 8):
    header = COLUMNS
    if drop_column:
        cols = header.split(",")
        cols.remove(drop_column)
        header = ",".join(cols)
    with open(path, "w") as fh:
        fh.write(f"# label: {label}\n# closure: {label}\n")
        fh.write(f"# config_hash: {config_hash}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _rows(n, gap_at=None):
    rows = []
    for i in range(1, n + 1):
        t = 0.01 * i
        lam = "" if gap_at is not None and i == gap_at else f"{0.05 + 0.001 * i}"
        rows.append([f"{t}", f"{0.5 * t}", f"{t * t}", lam, f"{0.1}",
                     f"{1e-3}", f"{1e-5}", f"{2e-5}", f"{1e-15}", "4"])
    return rows


def test_load_run_parses_metadata_and_series(tmp_path):
    path = tmp_path / "a.csv"
    _write_csv(path, _rows(5))
    bundle = load_run(path)
    assert bundle.label == "run-a"
    assert len(bundle) == 5
    assert bundle.config_hash.startswith("c0ffee12")
    np.testing.assert_allclose(bundle.series("t"), 0.01 * np.arange(1, 6))


def test_header_only_is_empty_bundle(tmp_path):
    path = tmp_path / "empty.csv"
    _write_csv(path, [])
    bundle = load_run(path)
    assert bundle.empty
    out = render_statistics_figure([bundle], "kinetic_energy",
                                   tmp_path / "fig.png")
    assert out is None
    assert not (tmp_path / "fig.png").exists()


def test_gap_markers_become_nan(tmp_path):
    path = tmp_path / "gap.csv"
    _write_csv(path, _rows(6, gap_at=3))
    bundle = load_run(path)
    lam = bundle.series("taylor_microscale")
    assert math.isnan(lam[2])
    assert not math.isnan(lam[3])


def test_missing_column_named(tmp_path):
    path = tmp_path / "bad.csv"
    _write_csv(path, _rows(3), drop_column="enstrophy")
    with pytest.raises(SchemaError) as err:
        load_run(path)
    assert "enstrophy" in str(err.value)


def test_unknown_panel_lists_valid_names(tmp_path):
    path = tmp_path / "a.csv"
    _write_csv(path, _rows(3))
    with pytest.raises(PanelNameError) as err:
        render_statistics_figure(load_runs([path]), "vorticity_flux", tmp_path / "x.png")
    for name in PANELS:
        assert name in str(err.value)


def test_four_runs_render_with_legend(tmp_path):
    paths = []
    for i in range(4):
        p = tmp_path / f"run{i}.csv"
        _write_csv(p, _rows(10), label=f"closure-{i}")
        paths.append(p)
    bundles = load_runs(paths)
    out = render_statistics_figure(bundles, "kinetic_energy", tmp_path / "ke.svg",
                                   fmt="svg")
    text = (tmp_path / "ke.svg").read_text()
    for i in range(4):
        assert f"closure-{i}" in text


def test_figure_embeds_config_hash(tmp_path):
    p = tmp_path / "a.csv"
    _write_csv(p, _rows(4), config_hash="deadbeef" * 8)
    render_statistics_figure(load_runs([p]), "enstrophy", tmp_path / "e.svg", fmt="svg")
    assert "deadbeef" in (tmp_path / "e.svg").read_text()


def test_render_is_byte_identical(tmp_path):
    p = tmp_path / "a.csv"
    _write_csv(p, _rows(20))
    bundles = load_runs([p])
    digests = []
    for name in ("one.png", "two.png"):
        render_statistics_figure(bundles, "k_avg", tmp_path / name)
        digests.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_loading_never_mutates_input(tmp_path):
    p = tmp_path / "a.csv"
    _write_csv(p, _rows(8))
    before = hashlib.sha256(p.read_bytes()).hexdigest()
    bundles = load_runs([p])
    render_statistics_figure(bundles, "turbulence_intensity", tmp_path / "i.png")
    assert hashlib.sha256(p.read_bytes()).hexdigest() == before


def test_cli_renders_all_default_panels(tmp_path, capsys):
    paths = []
    for i in range(2):
        p = tmp_path / f"r{i}.csv"
        _write_csv(p, _rows(6), label=f"r{i}")
        paths.append(str(p))
    out = tmp_path / "figs"
    code = main(["--in", *paths, "--out", str(out), "--format", "png"])
    assert code == 0
    for panel in PANELS:
        assert (out / f"{panel}.png").exists()


def test_cli_reports_schema_error(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    _write_csv(p, _rows(3), drop_column="k_avg")
    code = main(["--in", str(p), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "k_avg" in capsys.readouterr().err
