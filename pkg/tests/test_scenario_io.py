"""Configuration round trips, CSV/field output, forcing, and run() behavior."""

import hashlib
import math
import os

import numpy as np
import pytest

from urans2d.closures import Closure
from urans2d.config import MeshSpec, RunConfig, config_hash, parse_config, serialize_config
from urans2d.errors import ConfigurationError
from urans2d.forcing import ManufacturedForcing, OffsetCirclesForcing, make_forcing
from urans2d.output import write_field_vtk
from urans2d.scenario import offset_circles_config, run, time_average
from urans2d.statistics import STATS_COLUMNS, StatsRecord
from urans2d.stepper import StepperConfig


# -- forcing -------------------------------------------------------------------

def test_offset_forcing_center_and_rim():
    f = OffsetCirclesForcing()
    assert f(0.0, 0.0, 5.0) == (0.0, 0.0)
    fx, fy = f(0.6, 0.8, 3.0)
    assert fx == pytest.approx(0.0, abs=1e-15)
    assert fy == pytest.approx(0.0, abs=1e-15)


def test_offset_forcing_hand_value():
    f = OffsetCirclesForcing()
    fx, fy = f(0.0, 0.5, 2.0)
    assert fx == pytest.approx(-1.5, rel=1e-15)
    assert fy == pytest.approx(0.0, abs=1e-15)


def test_offset_forcing_ramp():
    f = OffsetCirclesForcing()
    half = f(0.2, 0.1, 0.5)
    full = f(0.2, 0.1, 1.0)
    assert half[0] == pytest.approx(0.5 * full[0], rel=1e-15)
    late = f(0.2, 0.1, 7.0)
    assert late == full


def test_manufactured_forcing_momentum_consistency():
    # f must equal the momentum operator applied to the exact fields; check the
    # divergence-free property and the forcing via finite differences in time
    forcing = ManufacturedForcing(0.05, profile="trig", time_profile="unsteady")
    rng = np.random.default_rng(0)
    x, y = rng.random(50) * 0.8 + 0.1, rng.random(50) * 0.8 + 0.1
    h = 1e-6
    vxp, vyp = forcing.exact_velocity(x + h, y, 0.7)
    vxm, vym = forcing.exact_velocity(x - h, y, 0.7)
    vxq, vyq = forcing.exact_velocity(x, y + h, 0.7)
    vxr, vyr = forcing.exact_velocity(x, y - h, 0.7)
    div = (vxp - vxm) / (2 * h) + (vyq - vyr) / (2 * h)
    assert np.abs(div).max() <= 1e-8


def test_make_forcing_names():
    assert make_forcing("zero").is_zero
    assert make_forcing("offset-circles").name == "offset-circles"
    assert make_forcing("mms-trig-steady", nu=0.1).name == "mms-trig-steady"
    with pytest.raises(ConfigurationError):
        make_forcing("vortex-sheet")


# -- config ----------------------------------------------------------------------

def test_config_round_trip():
    config = RunConfig(
        mesh=MeshSpec(kind="annulus", n_r=5, n_t=24, r1=1.0, r2=0.1, cx=0.5, cy=0.0),
        closure=Closure(variant="half-eq", nu=1e-4, tau=0.1, mu=0.55, kappa=0.41, L=1.0),
        stepper=StepperConfig(dt=0.01, picard_tol=1e-9, picard_max=25,
                              filter_on=True, t_star=1.0),
        forcing="offset-circles", t_final=2.0, u_ref=1.0,
        snapshot_times=(1.0, 2.0), label="bench")
    text = serialize_config(config)
    again = parse_config(text)
    assert serialize_config(again) == text
    assert config_hash(again) == config_hash(config)


def test_config_round_trip_unit_square():
    config = RunConfig(mesh=MeshSpec(kind="unit-square", n=6),
                       closure=Closure(variant="nse", nu=0.05),
                       stepper=StepperConfig(dt=0.05, filter_on=False),
                       forcing="mms-trig-steady", t_final=0.2)
    again = parse_config(serialize_config(config))
    assert serialize_config(again) == serialize_config(config)


def test_config_rejects_unreachable_activation():
    with pytest.raises(ConfigurationError):
        RunConfig(closure=Closure(variant="half-eq"),
                  stepper=StepperConfig(dt=0.01, t_star=5.0), t_final=2.0)


def test_config_parse_failure():
    with pytest.raises(ConfigurationError):
        parse_config("[mesh\nkind = annulus\n")
    with pytest.raises(ConfigurationError):
        parse_config("[mesh]\nkind = annulus\n")  # missing sections


# -- CSV and field output ----------------------------------------------------------

def _record(t=0.01):
    return StatsRecord(t=t, kinetic_energy=1 / 3, enstrophy=0.25,
                       taylor_microscale=math.nan, turbulence_intensity=0.5,
                       k_avg=1e-3, eps=1e-5, eps_model=2e-5,
                       budget_residual=-3e-16, picard_iters=4)


def test_stats_csv_header_only(tmp_path):
    from urans2d.output import write_stats_csv

    path = tmp_path / "stats.csv"
    write_stats_csv(path, [], {"label": "empty"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# label: empty"
    assert lines[1] == ",".join(STATS_COLUMNS)
    assert len(lines) == 2


def test_stats_csv_one_row_17_digits(tmp_path):
    from urans2d.output import write_stats_csv

    path = tmp_path / "stats.csv"
    write_stats_csv(path, [_record()], {})
    row = path.read_text().splitlines()[-1].split(",")
    assert row[1] == f"{1 / 3:.17g}"
    assert float(row[1]) == 1 / 3  # binary round trip
    assert row[3] == ""            # undefined statistic -> empty cell
    assert row[-1] == "4"


def _parse_vtk(path):
    # independent minimal reader for the legacy ASCII layout written here
    with open(path) as fh:
        lines = [l.strip() for l in fh]
    data = {}
    i = lines.index("DATASET UNSTRUCTURED_GRID") + 1
    n = int(lines[i].split()[1])
    data["points"] = np.array([[float(v) for v in lines[i + 1 + j].split()] for j in range(n)])
    i = next(k for k, l in enumerate(lines) if l.startswith("POINT_DATA"))
    while i < len(lines) - 1:
        i += 1
        token = lines[i].split()
        if not token:
            continue
        if token[0] == "VECTORS":
            data[token[1]] = np.array([[float(v) for v in lines[i + 1 + j].split()]
                                       for j in range(n)])
            i += n
        elif token[0] == "SCALARS":
            data[token[1]] = np.array([float(lines[i + 2 + j]) for j in range(n)])
            i += n + 1
    return data


def test_field_vtk_round_trip(tmp_path):
    from urans2d.mesh import gen_unit_square

    mesh = gen_unit_square(2)
    rng = np.random.default_rng(3)
    nsc = mesh.n_vertices + mesh.n_edges
    vel = rng.standard_normal(2 * nsc)
    pre = rng.standard_normal(mesh.n_vertices)
    nut = rng.random(mesh.n_vertices)
    k = rng.random(mesh.n_vertices)
    path = tmp_path / "fields.vtk"
    write_field_vtk(path, mesh, vel, pre, nut, k_nodal=k)
    data = _parse_vtk(path)
    nv = mesh.n_vertices
    assert np.array_equal(data["points"][:, :2], mesh.vertices)
    assert np.array_equal(data["velocity"][:, 0], vel[:nv])
    assert np.array_equal(data["velocity"][:, 1], vel[nsc:nsc + nv])
    assert np.array_equal(data["pressure"], pre)
    assert np.array_equal(data["nu_t"], nut)
    assert np.array_equal(data["tke"], k)


# -- run() ---------------------------------------------------------------------------

def _tiny_config(**kw):
    defaults = dict(
        mesh=MeshSpec(kind="annulus", n_r=3, n_t=12),
        closure=Closure(variant="half-eq", nu=1e-3, tau=0.1),
        stepper=StepperConfig(dt=0.01, picard_tol=1e-9, filter_on=True, t_star=0.05),
        forcing="offset-circles", t_final=0.1, label="tiny")
    defaults.update(kw)
    return RunConfig(**defaults)


def test_run_empty_is_header_only(tmp_path):
    config = _tiny_config(t_final=0.0)
    result = run(config, tmp_path / "empty")
    lines = (tmp_path / "empty" / "stats.csv").read_text().splitlines()
    assert lines[-1] == ",".join(STATS_COLUMNS)
    assert result.records == []
    assert not os.path.exists(tmp_path / "empty" / "FAILED")


def test_run_rest_state_all_zero(tmp_path):
    config = _tiny_config(closure=Closure(variant="nse", nu=1e-3),
                          stepper=StepperConfig(dt=0.01, filter_on=True),
                          forcing="zero", t_final=0.05)
    result = run(config, tmp_path / "rest")
    for r in result.records:
        assert r.kinetic_energy == 0.0
        assert r.enstrophy == 0.0
        assert r.k_avg == 0.0
        assert r.eps == 0.0
        assert r.eps_model == 0.0
        assert r.budget_residual == 0.0
        assert math.isnan(r.taylor_microscale)
        assert math.isnan(r.turbulence_intensity)


def test_run_is_deterministic_bytes(tmp_path):
    config = _tiny_config()
    run(config, tmp_path / "a")
    run(config, tmp_path / "b")
    a = (tmp_path / "a" / "stats.csv").read_bytes()
    b = (tmp_path / "b" / "stats.csv").read_bytes()
    assert hashlib.sha256(a).hexdigest() == hashlib.sha256(b).hexdigest()


def test_run_writes_outputs_and_scale_report(tmp_path):
    config = _tiny_config(snapshot_times=(0.05,))
    out = tmp_path / "full"
    result = run(config, out)
    assert (out / "stats.csv").exists()
    assert (out / "fields_final.vtk").exists()
    assert (out / "fields_t0.05.vtk").exists()
    assert (out / "scale_report.txt").exists()
    assert (out / "config.txt").exists()
    assert (out / "summary.txt").exists()
    assert result.scale.force_scale > 0
    meta = (out / "stats.csv").read_text().splitlines()
    assert any(l.startswith("# config_hash: ") for l in meta[:8])


def test_run_failure_leaves_marker(tmp_path, monkeypatch):
    config = _tiny_config()
    import urans2d.stepper as stepper_mod

    def boom(self, record_stats=True):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(stepper_mod.Simulation, "advance", boom)
    out = tmp_path / "broken"
    with pytest.raises(RuntimeError):
        run(config, out)
    assert (out / "FAILED").read_text().startswith("RuntimeError")


def test_benchmark_config_parameters():
    config = offset_circles_config("half-eq")
    assert config.closure.nu == 1e-4
    assert config.closure.tau == 0.1
    assert config.closure.mu == 0.55
    assert config.closure.kappa == 0.41
    assert config.closure.L == 1.0
    assert config.stepper.dt == 0.01
    assert config.stepper.t_star == 1.0
    assert config.t_final == 15.0
    assert config.mesh.n_t == 40


def test_time_average_trapezoid():
    t = np.linspace(0.0, 2.0, 21)
    v = 3.0 * np.ones_like(t)
    assert time_average(t, v, 0.5, 1.5) == pytest.approx(3.0, rel=1e-14)


def test_mms_poly_steady_reproduced_exactly():
    # the quadratic steady manufactured flow lies in the velocity space, so the
    # discrete solution stays on its interpolant to solver precision
    from urans2d.mesh import gen_unit_square
    from urans2d.scenario import velocity_error_l2, _set_exact_state
    from urans2d.stepper import Simulation

    nu = 0.5
    forcing = ManufacturedForcing(nu, profile="poly", time_profile="steady")
    sim = Simulation(gen_unit_square(3), Closure(variant="nse", nu=nu), forcing,
                     StepperConfig(dt=0.05, picard_tol=1e-13, picard_max=40,
                                   filter_on=False))
    _set_exact_state(sim, forcing, 0.0)
    for _ in range(3):
        sim.advance(record_stats=False)
    assert velocity_error_l2(sim, forcing, 0.15) <= 1e-10


def test_mms_picard_contraction_observed():
    # increments decrease monotonically after the second iteration
    from urans2d.mesh import gen_unit_square
    from urans2d.scenario import _set_exact_state
    from urans2d.stepper import Simulation

    nu = 0.05
    forcing = ManufacturedForcing(nu, profile="trig", time_profile="unsteady")
    sim = Simulation(gen_unit_square(8), Closure(variant="nse", nu=nu), forcing,
                     StepperConfig(dt=0.05, picard_tol=1e-12, picard_max=40,
                                   filter_on=False))
    _set_exact_state(sim, forcing, 0.0)
    sim.advance(record_stats=False)
    trace = []
    flow, iters, converged = sim.picard_momentum_solve(
        0.0, 0.1, bc_values=sim._wall_values(0.1), trace=trace)
    assert converged
    assert len(trace) >= 3
    assert all(b < a for a, b in zip(trace[1:], trace[2:]))


def test_compare_variants_share_mesh_step_and_forcing():
    from urans2d.scenario import COMPARE_VARIANTS

    configs = [offset_circles_config(v, "coarse") for v in COMPARE_VARIANTS]
    base = configs[0]
    for cfg in configs[1:]:
        assert cfg.mesh == base.mesh
        assert cfg.stepper == base.stepper
        assert cfg.forcing == base.forcing
