"""Velocity statistics, scale functionals and budget diagnostics."""

import math

import numpy as np
import pytest

from urans2d.closures import Closure, TurbState
from urans2d.errors import ConfigurationError, InvalidParameterError
from urans2d.fem import AssemblyContext
from urans2d.forcing import OffsetCirclesForcing, ZeroForcing
from urans2d.mesh import TriMesh, gen_eccentric_annulus, gen_unit_square
from urans2d.statistics import (corollary_residual, enstrophy, eps_model,
                                kinetic_energy, scale_report, taylor_microscale,
                                turbulence_intensity)

from test_fem import duffy_rule


@pytest.fixture(scope="module")
def square_ctx():
    return AssemblyContext(gen_unit_square(4))


def _interp(ctx, fx, fy):
    mesh = ctx.mesh
    nodes = np.concatenate([mesh.vertices, mesh.edge_midpoints()])
    return np.concatenate([fx(nodes[:, 0], nodes[:, 1]), fy(nodes[:, 0], nodes[:, 1])])


def test_kinetic_energy_zero_and_unit(square_ctx):
    ctx = square_ctx
    assert kinetic_energy(ctx, np.zeros(ctx.dofs.n_vel)) == 0.0
    unit = _interp(ctx, lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x))
    assert math.isclose(kinetic_energy(ctx, unit), 0.5, rel_tol=1e-13)


def test_kinetic_energy_matches_highorder_oracle(square_ctx):
    ctx = square_ctx
    rng = np.random.default_rng(12)
    vel = rng.standard_normal(ctx.dofs.n_vel)
    from urans2d.fem import eval_basis

    pts, wts = duffy_rule()
    mesh = ctx.mesh
    tri = mesh.vertices[mesh.triangles]
    p0 = tri[:, 0]
    jac = np.stack([tri[:, 1] - p0, tri[:, 2] - p0], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    vals6 = np.array([eval_basis("P2", p)[0] for p in pts])
    lg = ctx.dofs.loc2glob_p2
    ux = np.einsum("qi,ti->tq", vals6, vel[lg])
    uy = np.einsum("qi,ti->tq", vals6, vel[ctx.dofs.n_scalar + lg])
    oracle = 0.5 * float(np.einsum("t,q,tq->", det, wts, ux ** 2 + uy ** 2)) / mesh.total_area
    assert math.isclose(kinetic_energy(ctx, vel), oracle, rel_tol=1e-13)


def test_enstrophy_shear_and_rotation(square_ctx):
    ctx = square_ctx
    shear = _interp(ctx, lambda x, y: y, lambda x, y: np.zeros_like(x))
    assert math.isclose(enstrophy(ctx, shear), 0.5, rel_tol=1e-12)
    rot = _interp(ctx, lambda x, y: -y, lambda x, y: x)
    assert math.isclose(enstrophy(ctx, rot), 2.0, rel_tol=1e-12)


def test_enstrophy_gradient_field_vanishes(square_ctx):
    ctx = square_ctx
    grad = _interp(ctx, lambda x, y: 3 * x ** 2, lambda x, y: -2 * y)
    assert enstrophy(ctx, grad) <= 1e-12


def test_taylor_microscale_hand_value(square_ctx):
    ctx = square_ctx
    shear = _interp(ctx, lambda x, y: y, lambda x, y: np.zeros_like(x))
    expected = (1.0 / 15.0) * (1.5) ** (-0.5)
    got = taylor_microscale(ctx, shear)
    assert math.isclose(got, expected, rel_tol=1e-12)
    assert math.isclose(got, 0.0544331, rel_tol=1e-6)


def test_taylor_microscale_scale_invariant(square_ctx):
    ctx = square_ctx
    rng = np.random.default_rng(8)
    vel = rng.standard_normal(ctx.dofs.n_vel)
    assert math.isclose(taylor_microscale(ctx, vel), taylor_microscale(ctx, 7.3 * vel),
                        rel_tol=1e-12)


def test_taylor_microscale_undefined_for_constant(square_ctx):
    ctx = square_ctx
    unit = _interp(ctx, lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x))
    assert math.isnan(taylor_microscale(ctx, unit))


def test_taylor_microscale_cauchy_under_refinement():
    smooth_x = lambda x, y: np.sin(np.pi * y) * np.cos(0.5 * np.pi * x)
    smooth_y = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    values = []
    for n in (8, 16, 32):
        ctx = AssemblyContext(gen_unit_square(n))
        vel = _interp(ctx, smooth_x, smooth_y)
        values.append(taylor_microscale(ctx, vel))
    assert abs(values[2] - values[1]) <= 0.01 * abs(values[2])


def test_turbulence_intensity_limits(square_ctx):
    ctx = square_ctx
    vel = _interp(ctx, lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x))
    assert turbulence_intensity(ctx, TurbState.absent(), vel) == 0.0
    assert turbulence_intensity(ctx, TurbState.scalar(0.7), np.zeros(ctx.dofs.n_vel)) == 1.0
    assert math.isnan(turbulence_intensity(ctx, TurbState.absent(), np.zeros(ctx.dofs.n_vel)))


def test_turbulence_intensity_scalar_hand_value(square_ctx):
    # k = 0.5 and mean |v|^2 = 1 on the unit square: I = 1 / (1 + 1) = 1/2
    ctx = square_ctx
    vel = _interp(ctx, lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x))
    got = turbulence_intensity(ctx, TurbState.scalar(0.5), vel)
    assert math.isclose(got, 0.5, rel_tol=1e-13)


def test_eps_model_is_sum_of_parts(square_ctx):
    ctx = square_ctx
    rng = np.random.default_rng(2)
    vel = rng.standard_normal(ctx.dofs.n_vel)
    closure = Closure(variant="half-eq", nu=3e-3, tau=0.2)
    turb = TurbState.scalar(0.11)
    viscous = closure.nu * ctx.integrate("symgradsq", vel) / ctx.total_area
    decay = math.sqrt(2.0) / 2.0 / closure.tau * 0.11
    assert math.isclose(eps_model(ctx, closure, turb, vel), viscous + decay, rel_tol=1e-14)


def test_statistics_invariant_under_renumbering():
    mesh = gen_unit_square(3)
    rng = np.random.default_rng(5)
    perm = rng.permutation(mesh.n_vertices)
    inv = np.argsort(perm)
    verts2 = mesh.vertices[perm]
    tris2 = inv[mesh.triangles]
    markers2 = {}
    for eid, marker in mesh.boundary_marker_by_edge.items():
        i, j = mesh.edges[eid]
        markers2[tuple(sorted((inv[i], inv[j])))] = marker
    mesh2 = TriMesh(verts2, tris2, markers2)
    ctx, ctx2 = AssemblyContext(mesh), AssemblyContext(mesh2)

    f1 = lambda x, y: np.sin(x + 2 * y)
    f2 = lambda x, y: np.cos(3 * x) * y
    vel1 = _interp(ctx, f1, f2)
    vel2 = _interp(ctx2, f1, f2)
    for fn in (kinetic_energy, enstrophy, taylor_microscale):
        assert math.isclose(fn(ctx, vel1), fn(ctx2, vel2), rel_tol=1e-12)


# -- corollary residual ------------------------------------------------------------

def test_corollary_residual_zero_series():
    t = np.linspace(1.0, 5.0, 41)
    assert corollary_residual(t, np.zeros_like(t), np.zeros_like(t), 0.55, 0.1, 4.0) == 0.0


def test_corollary_residual_constant_series_hand_value():
    # constant k and eps: r = |mu tau k - sqrt(2) mu tau^2 eps| exactly
    t = np.linspace(1.0, 9.0, 81)
    k, e, mu, tau = 0.3, 1.7, 0.55, 0.1
    got = corollary_residual(t, np.full_like(t, k), np.full_like(t, e), mu, tau, 8.0)
    expected = abs(mu * tau * k - math.sqrt(2.0) * mu * tau ** 2 * e)
    assert math.isclose(got, expected, rel_tol=1e-12)


def test_corollary_residual_discrete_ode_series():
    # Series generated by the discrete TKE recursion. Summing the recursion and
    # inserting it into the trapezoidal time averages leaves only endpoint terms:
    #   r = | (k_0 - k_N) (mu tau / T)(dt/2 + sqrt(2) tau)
    #       - (eps_0 - eps_N) sqrt(2) mu tau^2 dt / (2 T) |
    from urans2d.closures import step_k_ode

    dt, tau, mu = 0.01, 0.1, 0.55
    k = [1.0]
    eps = [0.0]
    for n in range(800):
        e = 0.4 + 0.1 * math.sin(0.05 * n)
        k.append(float(step_k_ode(k[-1], e, dt, tau)))
        eps.append(e)
    t = 1.0 + dt * np.arange(801)
    horizon = 8.0
    got = corollary_residual(t, np.array(k), np.array(eps), mu, tau, horizon)
    expected = abs((k[0] - k[-1]) * mu * tau / horizon * (dt / 2 + math.sqrt(2.0) * tau)
                   - (eps[0] - eps[-1]) * math.sqrt(2.0) * mu * tau ** 2 * dt / (2 * horizon))
    assert math.isclose(got, expected, rel_tol=1e-9, abs_tol=1e-15)


def test_corollary_residual_needs_samples():
    with pytest.raises(InvalidParameterError):
        corollary_residual([1.0], [0.0], [0.0], 0.55, 0.1, 1.0)
    with pytest.raises(InvalidParameterError):
        corollary_residual([1.0, 1.1, 1.2], [0, 0, 0], [0, 0, 0], 0.55, 0.1, 0.01)


# -- scale report -------------------------------------------------------------------

def test_scale_report_constant_forcing_unit_force():
    ctx = AssemblyContext(gen_unit_square(4))

    class ConstForcing(ZeroForcing):
        is_zero = False

        def __call__(self, x, y, t):
            z = np.zeros_like(np.asarray(x, dtype=float))
            return z, z + 1.0

    times = np.linspace(0.0, 2.0, 21)
    report = scale_report(ctx, ConstForcing(), 1.0, times, np.full(21, 0.5),
                          np.full(21, 0.1), reynolds=1e3, tau=0.1)
    assert math.isclose(report.force_scale, 1.0, rel_tol=1e-13)
    # constant forcing has no gradient candidates; the domain scale wins
    assert math.isclose(report.length_scale, 1.0, rel_tol=1e-13)
    assert math.isclose(report.velocity_scale, 1.0, rel_tol=1e-12)
    assert math.isclose(report.turnover_time, 1.0, rel_tol=1e-12)


def test_scale_report_force_scale_matches_highorder_quadrature():
    # |f|^2 of the swirl forcing is degree six, integrated exactly by the fixed rule
    mesh = gen_eccentric_annulus(6, 24, 1.0, 0.1, (0.5, 0.0))
    ctx = AssemblyContext(mesh)
    forcing = OffsetCirclesForcing()
    pts, wts = duffy_rule()
    tri = mesh.vertices[mesh.triangles]
    p0 = tri[:, 0]
    jac = np.stack([tri[:, 1] - p0, tri[:, 2] - p0], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    phys = p0[:, None, :] + np.einsum("tde,qe->tqd", jac, pts)
    fx, fy = forcing(phys[:, :, 0], phys[:, :, 1], 2.0)
    oracle = math.sqrt(float(np.einsum("t,q,tq->", det, wts, fx ** 2 + fy ** 2))
                       / mesh.total_area)
    times = np.linspace(0.0, 1.0, 11)
    report = scale_report(ctx, forcing, 2.0, times, np.full(11, 0.5), np.full(11, 0.1),
                          reynolds=1e4, tau=0.1)
    assert math.isclose(report.force_scale, oracle, rel_tol=1e-12)


def test_scale_report_sampling_is_stable():
    mesh = gen_eccentric_annulus(6, 24, 1.0, 0.1, (0.5, 0.0))
    ctx = AssemblyContext(mesh)
    forcing = OffsetCirclesForcing()
    times = np.linspace(0.0, 1.0, 11)
    args = (ctx, forcing, 2.0, times, np.full(11, 0.5), np.full(11, 0.1))
    r1 = scale_report(*args, reynolds=1e4, tau=0.1, n_samples=10_000)
    r2 = scale_report(*args, reynolds=1e4, tau=0.1, n_samples=40_000)
    assert abs(r1.length_scale - r2.length_scale) <= 0.005 * r2.length_scale


def test_scale_report_rejects_zero_forcing():
    ctx = AssemblyContext(gen_unit_square(2))
    times = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ConfigurationError):
        scale_report(ctx, ZeroForcing(), 1.0, times, np.full(11, 0.5), np.full(11, 0.1),
                     reynolds=1e3, tau=0.1)
