"""Scenario drivers: single runs, the offset-circles benchmark, manufactured
convergence studies, the four-closure comparison, and the verification suite.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from . import closures, statistics
from .closures import Closure
from .config import MeshSpec, RunConfig, config_hash, serialize_config
from .errors import ConfigurationError
from .forcing import ManufacturedForcing, make_forcing
from .mesh import gen_eccentric_annulus, gen_unit_square, read_mesh
from .output import StatsWriter, write_field_vtk
from .statistics import ScaleReport, corollary_residual, scale_report
from .stepper import Simulation, StepperConfig

# resolution-matched benchmark meshes: 40 outer nodes / 9 layers gives a longest
# edge of 0.2121 vs the reported 0.208201; the reference level (80 nodes / 18
# layers) matches the reported fine max edge 0.108 almost exactly
COARSE_MESH = MeshSpec(kind="annulus", n_r=9, n_t=40, r1=1.0, r2=0.1, cx=0.5, cy=0.0)
FINE_MESH = MeshSpec(kind="annulus", n_r=18, n_t=80, r1=1.0, r2=0.1, cx=0.5, cy=0.0)


def mesh_from_spec(spec):
    if spec.kind == "unit-square":
        return gen_unit_square(spec.n)
    if spec.kind == "annulus":
        return gen_eccentric_annulus(spec.n_r, spec.n_t, spec.r1, spec.r2, (spec.cx, spec.cy))
    with open(spec.path) as fh:
        return read_mesh(fh)


def offset_circles_config(variant, resolution="coarse", tau=0.1, filter_on=True,
                          picard_tol=1e-9, t_final=15.0, dt=0.01, label=""):
    """The swirling-flow benchmark configuration at the published parameters."""
    mesh = COARSE_MESH if resolution == "coarse" else FINE_MESH
    closure = Closure(variant=variant, nu=1e-4, tau=tau, mu=0.55, kappa=0.41, L=1.0)
    stepper = StepperConfig(dt=dt, picard_tol=picard_tol, picard_max=25,
                            filter_on=filter_on, t_star=1.0)
    return RunConfig(mesh=mesh, closure=closure, stepper=stepper,
                     forcing="offset-circles", t_final=t_final, u_ref=1.0,
                     label=label or f"{variant}-{resolution}")


@dataclass
class RunResult:
    config: RunConfig
    records: list
    sim: Simulation
    csv_path: str = ""
    scale: ScaleReport = None
    max_energy_plus_k: float = 0.0
    wall_seconds: float = 0.0

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def k_history(self):
        """Scalar TKE trajectory in extended precision (half-eq runs)."""
        return [r._k_exact for r in self.records if hasattr(r, "_k_exact")]


def _metadata(config):
    m = config.mesh
    mesh_desc = {
        "unit-square": f"unit-square n={m.n}",
        "annulus": f"annulus n_r={m.n_r} n_t={m.n_t} r1={m.r1:g} r2={m.r2:g} c=({m.cx:g},{m.cy:g})",
        "file": f"file {m.path}",
    }[m.kind]
    c, s = config.closure, config.stepper
    return {
        "format": "urans2d-stats v1",
        "label": config.label,
        "closure": c.variant,
        "params": (f"nu={c.nu:.17g} tau={c.tau:.17g} mu={c.mu:.17g} "
                   f"kappa={c.kappa:.17g} L={c.L:.17g} l_min={c.l_min:.17g}"),
        "mesh": mesh_desc,
        "stepper": (f"dt={s.dt:.17g} t_star={s.t_star:.17g} "
                    f"filter={'on' if s.filter_on else 'off'} picard_tol={s.picard_tol:.17g}"),
        "forcing": config.forcing,
        "config_hash": config_hash(config),
    }


def run(config, out_dir, progress=None):
    """Execute one simulation, streaming statistics and writing field output.

    Writes stats.csv (one row per step), field snapshots at the configured
    times plus the final state, scale_report.txt for nonzero forcing, the
    serialized config, and summary.txt. Any error leaves a FAILED marker file
    beside the partial outputs and re-raises.
    """
    import time

    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, "FAILED")
    if os.path.exists(marker):
        os.remove(marker)
    start = time.perf_counter()
    try:
        result = _run_inner(config, out_dir, progress)
    except Exception as err:
        with open(marker, "w") as fh:
            fh.write(f"{type(err).__name__}: {err}\n")
        raise
    result.wall_seconds = time.perf_counter() - start
    return result


def _run_inner(config, out_dir, progress):
    mesh = mesh_from_spec(config.mesh)
    forcing = make_forcing(config.forcing, nu=config.closure.nu)
    sim = Simulation(mesh, config.closure, forcing, config.stepper, u_ref=config.u_ref)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(serialize_config(config))

    dt = config.stepper.dt
    n_steps = int(round(config.t_final / dt))
    snapshots = sorted(set(config.snapshot_times))
    next_snap = 0
    records = []
    csv_path = os.path.join(out_dir, "stats.csv")
    with StatsWriter(csv_path, _metadata(config)) as writer:
        for n in range(n_steps):
            record = sim.advance()
            if sim.state.turb.kind == "scalar":
                record._k_exact = sim.state.turb.value
            records.append(record)
            writer.write(record)
            while next_snap < len(snapshots) and sim.state.t >= snapshots[next_snap] - 1e-9 * dt:
                _write_snapshot(sim, out_dir, f"fields_t{snapshots[next_snap]:g}.vtk")
                next_snap += 1
            if progress is not None:
                progress(n + 1, n_steps, record)

    if n_steps > 0:
        _write_snapshot(sim, out_dir, "fields_final.vtk")
    result = RunResult(config=config, records=records, sim=sim, csv_path=csv_path,
                       max_energy_plus_k=sim.max_energy_plus_k)
    if records and not forcing.is_zero:
        result.scale = scale_report(
            sim.ctx, forcing, t_eval=config.t_final,
            times=result.series("t"),
            kinetic_series=result.series("kinetic_energy"),
            eps_model_series=result.series("eps_model"),
            reynolds=sim.reynolds, tau=config.closure.tau)
        _write_scale_report(os.path.join(out_dir, "scale_report.txt"), result.scale)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(f"steps: {len(records)}\n")
        fh.write(f"max_energy_plus_k: {sim.max_energy_plus_k:.17g}\n")
        if records:
            fh.write(f"final_kinetic_energy: {records[-1].kinetic_energy:.17g}\n")
            fh.write(f"final_k_avg: {records[-1].k_avg:.17g}\n")
    return result


def _write_snapshot(sim, out_dir, name):
    mesh = sim.mesh
    turb = sim.state.turb
    nv = mesh.n_vertices
    if turb.kind == "field":
        k_vertex = turb.values[:nv]
    elif turb.kind == "scalar":
        k_vertex = np.full(nv, float(turb.value))
    else:
        k_vertex = np.zeros(nv)
    y_vertex = sim.ydist.vertex_values if sim.ydist is not None else None
    nut_nodal = np.asarray(closures.nu_t(sim.closure, k_vertex, y_vertex), dtype=float)
    if nut_nodal.ndim == 0:
        nut_nodal = np.zeros(nv)
    write_field_vtk(
        os.path.join(out_dir, name), mesh, sim.state.flow.vel, sim.state.flow.pre,
        nut_nodal, k_nodal=turb.values if turb.kind == "field" else None)


def _write_scale_report(path, scale):
    with open(path, "w") as fh:
        for key in ("force_scale", "velocity_scale", "length_scale", "turnover_time",
                    "tau_over_turnover", "dissipation_reference", "mean_eps_model"):
            fh.write(f"{key} = {getattr(scale, key):.17g}\n")


# -- four-closure comparison ---------------------------------------------------

COMPARE_VARIANTS = ("nse", "one-eq", "one-eq-prandtl", "half-eq")


def compare(out_root, with_reference=True, t_final=15.0, filter_on=True, progress=None):
    """Run all closures on the identical coarse mesh, plus the finer plain-flow
    reference; per-run outputs land in subdirectories of out_root."""
    results = {}
    jobs = []
    if with_reference:
        # the long reference run goes first so a process pool overlaps it
        jobs.append(("nse-ref", offset_circles_config(
            "nse", "fine", t_final=t_final, filter_on=filter_on, label="nse-ref")))
    jobs += [(v, offset_circles_config(v, "coarse", t_final=t_final, filter_on=filter_on,
                                       label=v)) for v in COMPARE_VARIANTS]
    max_workers = _thread_cap()
    if max_workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(max_workers, len(jobs))) as pool:
            futures = {
                name: pool.submit(_compare_job, cfg, os.path.join(out_root, name))
                for name, cfg in jobs}
            for name, fut in futures.items():
                results[name] = fut.result()
    else:
        for name, cfg in jobs:
            results[name] = run(cfg, os.path.join(out_root, name), progress=progress)
    return results


def _compare_job(cfg, out_dir):
    result = run(cfg, out_dir)
    result.sim.solver._lu = None  # SuperLU handles cannot cross process boundaries
    return result


def _thread_cap():
    try:
        return max(1, int(os.environ.get("URANS_THREADS", "1")))
    except ValueError:
        return 1


def time_average(times, values, t_lo, t_hi):
    """Trapezoidal average of a sampled series over [t_lo, t_hi]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (times >= t_lo - 1e-12) & (times <= t_hi + 1e-12)
    if mask.sum() < 2:
        raise ConfigurationError("averaging window contains fewer than 2 samples")
    t = times[mask]
    return float(np.trapezoid(values[mask], t) / (t[-1] - t[0]))


# -- manufactured-solution studies ----------------------------------------------

@dataclass
class MmsResult:
    rows: list          # (resolution, error) pairs
    order: float
    table: str


def _mms_simulation(n, nu, dt, filter_on, time_profile, picard_tol=1e-10):
    mesh = gen_unit_square(n)
    closure = Closure(variant="nse", nu=nu)
    forcing = ManufacturedForcing(nu, profile="trig", time_profile=time_profile)
    cfg = StepperConfig(dt=dt, picard_tol=picard_tol, picard_max=50,
                        filter_on=filter_on, t_star=0.0)
    sim = Simulation(mesh, closure, forcing, cfg)
    _set_exact_state(sim, forcing, 0.0)
    return sim, forcing


def _set_exact_state(sim, forcing, t):
    mesh = sim.mesh
    nodes = np.concatenate([mesh.vertices, mesh.edge_midpoints()])
    vx, vy = forcing.exact_velocity(nodes[:, 0], nodes[:, 1], t)
    sim.state.flow.vel[:] = np.concatenate([vx, vy])
    sim.state.flow.pre[:] = forcing.exact_pressure(mesh.vertices[:, 0], mesh.vertices[:, 1], t)


def velocity_error_l2(sim, forcing, t):
    """L2 norm of the velocity error against the exact manufactured field."""
    ctx = sim.ctx
    vh = ctx.vel_at_quad(sim.state.flow.vel)
    ex, ey = forcing.exact_velocity(ctx.qpoints[:, :, 0], ctx.qpoints[:, :, 1], t)
    dens = (vh[:, :, 0] - ex) ** 2 + (vh[:, :, 1] - ey) ** 2
    return math.sqrt(ctx.integrate_scalar_q(dens))


def _fit_order(hs, errs):
    hs = np.asarray(hs, dtype=float)
    errs = np.maximum(np.asarray(errs, dtype=float), 1e-300)
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def mms_spatial_study(ns=(8, 16, 32), nu=0.1, dt=0.02, t_final=0.5):
    """Spatial accuracy with a steady manufactured flow.

    Backward Euler converges to the discrete steady state, so the remaining
    final-time error is the spatial discretization error.
    """
    rows = []
    for n in ns:
        sim, forcing = _mms_simulation(n, nu, dt, filter_on=False, time_profile="steady")
        for _ in range(int(round(t_final / dt))):
            sim.advance(record_stats=False)
        rows.append((n, velocity_error_l2(sim, forcing, t_final)))
    order = _fit_order([1.0 / n for n, _ in rows], [e for _, e in rows])
    table = "\n".join([f"n={n:<4d} h={1.0 / n:<10.5g} L2_error={e:.6e}" for n, e in rows]
                      + [f"fitted spatial order: {order:.3f}"])
    return MmsResult(rows=rows, order=order, table=table)


def mms_temporal_study(dts=(0.1, 0.05, 0.025), n=32, nu=0.1, t_final=1.0, filter_on=False):
    """Temporal accuracy with a time-dependent manufactured flow on a fine mesh."""
    rows = []
    for dt in dts:
        sim, forcing = _mms_simulation(n, nu, dt, filter_on=filter_on,
                                       time_profile="unsteady")
        for _ in range(int(round(t_final / dt))):
            sim.advance(record_stats=False)
        rows.append((dt, velocity_error_l2(sim, forcing, t_final)))
    order = _fit_order([dt for dt, _ in rows], [e for _, e in rows])
    table = "\n".join(
        [f"dt={dt:<10.5g} L2_error={e:.6e}" for dt, e in rows]
        + [f"fitted temporal order ({'filter on' if filter_on else 'filter off'}): {order:.3f}"])
    return MmsResult(rows=rows, order=order, table=table)


def run_mms(out_dir, ns=(8, 16, 32), dts=(0.1, 0.05, 0.025), quick=False):
    """Full convergence study; writes mms_report.txt and returns the results."""
    os.makedirs(out_dir, exist_ok=True)
    if quick:
        ns, dts = (8, 16), (0.1, 0.05)
    spatial = mms_spatial_study(ns=ns)
    temporal_plain = mms_temporal_study(dts=dts, filter_on=False)
    temporal_filtered = mms_temporal_study(dts=dts, filter_on=True)
    report = "\n\n".join([spatial.table, temporal_plain.table, temporal_filtered.table]) + "\n"
    with open(os.path.join(out_dir, "mms_report.txt"), "w") as fh:
        fh.write(report)
    return spatial, temporal_plain, temporal_filtered


# -- verification suite -----------------------------------------------------------

def verify_suite(out_dir, quick=False):
    """Energy identity, TKE positivity/decay, ODE order and the time-averaged
    TKE balance, on short offset-circles runs. Returns [(name, ok, detail)]."""
    os.makedirs(out_dir, exist_ok=True)
    checks = []

    t_budget = 2.0
    cfg = offset_circles_config("half-eq", filter_on=False, picard_tol=1e-11,
                                t_final=t_budget, label="verify-energy")
    cfg.stepper.picard_max = 60
    res = run(cfg, os.path.join(out_dir, "energy"))
    worst = _worst_relative_budget(res)
    checks.append(("energy-identity", worst <= 1e-8,
                   f"max relative budget residual {worst:.3e} (bound 1e-8)"))

    ks = res.k_history()
    checks.append(("tke-positivity", bool(ks) and all(k > 0 for k in ks),
                   f"{len(ks)} TKE samples, min {float(min(ks)) if ks else math.nan:.3e}"))

    t_fast = 2.0 if quick else 6.0
    cfg2 = offset_circles_config("half-eq", tau=1e-3, t_final=t_fast, label="verify-decay")
    res2 = run(cfg2, os.path.join(out_dir, "decay"))
    ks2 = res2.k_history()
    decreasing = all(b < a for a, b in zip(ks2, ks2[1:]))
    checks.append(("tke-small-tau-decay", decreasing and ks2[-1] > 0,
                   f"k fell from {float(ks2[0]):.3e} to {float(ks2[-1]):.3e}"))

    orders = ode_convergence_orders()
    checks.append(("tke-ode-order", min(orders) >= 0.9,
                   "orders " + ", ".join(f"{o:.3f}" for o in orders)))

    t_cor = 4.0 if quick else 9.0
    cfg3 = offset_circles_config("half-eq", t_final=t_cor, label="verify-balance")
    res3 = run(cfg3, os.path.join(out_dir, "balance"))
    horizon = 1.5 if quick else 4.0
    r1, r2 = tke_balance_residuals(res3, horizon)
    checks.append(("tke-balance-decay", r2 <= 0.7 * r1,
                   f"r({horizon:g})={r1:.3e}, r({2 * horizon:g})={r2:.3e}"))

    with open(os.path.join(out_dir, "verify_report.txt"), "w") as fh:
        for name, ok, detail in checks:
            fh.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    return checks


def _worst_relative_budget(result):
    """Largest per-step |budget residual| relative to the largest budget term."""
    worst = 0.0
    for r in result.records:
        scale = max(getattr(r, "_budget_scale", 0.0), 1e-30)
        worst = max(worst, abs(r.budget_residual) / scale)
    return worst


def ode_convergence_orders(dts=(0.02, 0.01, 0.005), tau=0.1, t_final=1.0, k0=1.0):
    """Observed orders of the unforced scalar TKE recursion against the exact decay."""
    errs = []
    for dt in dts:
        k = np.longdouble(k0)
        for _ in range(int(round(t_final / dt))):
            k = closures.step_k_ode(k, 0.0, dt, tau)
        exact = math.exp(-math.sqrt(2.0) / 2.0 * t_final / tau) * k0
        errs.append(abs(float(k) - exact))
    return [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]


def tke_balance_residuals(result, horizon):
    """Time-averaged TKE balance residuals r(T), r(2T) from the activation time on."""
    t_star = result.config.stepper.t_star
    times = result.series("t")
    mask = times >= t_star - 1e-12
    t = times[mask]
    k = result.series("k_avg")[mask]
    e = result.series("eps")[mask]
    mu, tau = result.config.closure.mu, result.config.closure.tau
    return (corollary_residual(t, k, e, mu, tau, horizon),
            corollary_residual(t, k, e, mu, tau, 2 * horizon))
