"""Velocity statistics, dissipation functionals and budget diagnostics.

All statistics are volume averages over the meshed domain. Undefined values
(zero-gradient Taylor microscale, all-zero intensity denominator) are
reported as NaN and serialized as empty CSV cells, never raised.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import closures
from .errors import InvalidParameterError

HALF_SQRT2 = math.sqrt(2.0) / 2.0

STATS_COLUMNS = (
    "t", "kinetic_energy", "enstrophy", "taylor_microscale",
    "turbulence_intensity", "k_avg", "eps", "eps_model",
    "budget_residual", "picard_iters",
)


@dataclass
class StatsRecord:
    """One row of time-series diagnostics."""

    t: float
    kinetic_energy: float
    enstrophy: float
    taylor_microscale: float       # NaN when the gradient vanishes
    turbulence_intensity: float    # NaN when the denominator vanishes
    k_avg: float
    eps: float
    eps_model: float
    budget_residual: float
    picard_iters: int
    picard_converged: bool = True  # not part of the CSV schema

    def as_row(self):
        return tuple(getattr(self, name) for name in STATS_COLUMNS)


@dataclass
class ScaleReport:
    """Forcing and velocity scales of a completed run."""

    force_scale: float        # F = sqrt(mean |f|^2)
    velocity_scale: float     # U from the finite-horizon running average
    length_scale: float       # min of the four forcing-based candidates
    turnover_time: float      # length_scale / velocity_scale
    tau_over_turnover: float
    dissipation_reference: float   # 4 (1 + 1/Re) U^3 / L, reported not asserted
    mean_eps_model: float


def kinetic_energy(ctx, vel):
    """(1/|Omega|) integral of |v|^2 / 2."""
    return 0.5 * ctx.integrate("l2sq", vel) / ctx.total_area


def enstrophy(ctx, vel):
    """(1/|Omega|) integral of |curl v|^2 / 2 (scalar curl in 2D)."""
    return 0.5 * ctx.integrate("curlsq", vel) / ctx.total_area


def taylor_microscale(ctx, vel):
    """(1/15) * (integral |symgrad v|^2 / integral |v|^2)^(-1/2), as a plain ratio.

    Returns NaN for a gradient-free field.
    """
    grad2 = ctx.integrate("symgradsq", vel)
    l2 = ctx.integrate("l2sq", vel)
    if l2 <= 0.0 or grad2 <= 1e-24 * l2:
        return math.nan
    return (1.0 / 15.0) * (grad2 / l2) ** (-0.5)


def turbulence_intensity(ctx, turb, vel):
    """integral 2k / integral (2k + |v|^2); NaN if the denominator vanishes."""
    l2 = ctx.integrate("l2sq", vel)
    if turb.kind == "scalar":
        num = 2.0 * float(turb.value) * ctx.total_area
    elif turb.kind == "field":
        num = 2.0 * ctx.integrate_scalar_q(np.maximum(ctx.p1_at_quad(turb.values), 0.0))
    else:
        num = 0.0
    denom = num + l2
    if denom <= 0.0:
        return math.nan
    return num / denom


def eps_model(ctx, closure, turb, vel):
    """Viscous dissipation plus the TKE decay work rate.

    (1/|Omega|) integral nu |symgrad v|^2 + (sqrt(2)/2) k(t) / tau with the
    volume-averaged TKE; literal definition, reported alongside the budget.
    """
    viscous = closure.nu * ctx.integrate("symgradsq", vel) / ctx.total_area
    return viscous + HALF_SQRT2 / closure.tau * turb.k_avg(ctx)


def budget_terms(ctx, closure, flow_new, flow_old, turb_new, turb_old, dt,
                 force_q, y_q=None):
    """Terms of the discrete per-step energy identity; their sum is the residual.

    With the skew convection form, exact linear solves and no time filter,
    rate-of-change + backward-Euler dissipation + assembled viscous work +
    TKE decay - TKE production - forcing work cancels to solver precision.
    The identity tested here pairs the assembled (2 nu + nu_T) sym-grad form
    with the discrete TKE update, so the viscous coefficient is 2 nu after
    the eddy terms cancel.
    """
    area = ctx.total_area
    e_new = 0.5 * ctx.integrate("l2sq", flow_new.vel) / area
    e_old = 0.5 * ctx.integrate("l2sq", flow_old.vel) / area
    k_new = turb_new.k_avg(ctx)
    k_old = turb_old.k_avg(ctx)
    diff = flow_new.vel - flow_old.vel
    terms = {
        "rate": (e_new - e_old) / dt + (k_new - k_old) / dt,
        "numerical_dissipation": ctx.integrate("l2sq", diff) / (2.0 * dt * area),
        "viscous": ctx.integrate(
            "symgradsq", flow_new.vel,
            weight=closures.total_viscosity_at_quad(closure, turb_old, ctx, y_q)) / area,
        "k_decay": HALF_SQRT2 / closure.tau * k_new if turb_new.kind != "absent" else 0.0,
        "k_production": -closures.eps_of(ctx, closure, turb_old, flow_new.vel, y_q),
        "forcing": -ctx.integrate("dot", flow_new.vel, force_q=force_q) / area,
    }
    return terms


def budget_residual(ctx, closure, flow_new, flow_old, turb_new, turb_old, dt,
                    force_q, y_q=None):
    """Signed residual of the discrete energy identity for one step."""
    return float(sum(budget_terms(
        ctx, closure, flow_new, flow_old, turb_new, turb_old, dt, force_q, y_q).values()))


def corollary_residual(times, k_series, eps_series, mu, tau, horizon):
    """Time-averaged TKE balance residual over the first `horizon` time units.

    r(T) = | (mu tau / T) int k dt - (sqrt(2) mu tau^2 / T) int eps dt | with
    trapezoidal quadrature of the sampled series, integrating from the first
    sample. Decays like O(1/T) on a statistically steady run.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise InvalidParameterError("need at least 2 samples")
    t0 = times[0]
    mask = times <= t0 + horizon + 1e-12
    if mask.sum() < 2:
        raise InvalidParameterError(
            f"horizon {horizon} spans fewer than 2 samples of the series")
    t = times[mask]
    span = t[-1] - t0
    if span <= 0:
        raise InvalidParameterError("series does not advance in time")
    k_int = np.trapezoid(np.asarray(k_series, dtype=float)[mask], t)
    e_int = np.trapezoid(np.asarray(eps_series, dtype=float)[mask], t)
    return abs(mu * tau / span * k_int - math.sqrt(2.0) * mu * tau ** 2 / span * e_int)


def _sample_points(ctx, n_target):
    """Deterministic per-triangle lattice (boundary inclusive) of ~n_target points.

    Including the triangle edges and vertices matters for the sup candidate:
    forcing gradients typically peak on the domain boundary.
    """
    nt = ctx.mesh.n_triangles
    per_tri = max(3, int(np.ceil(n_target / nt)))
    m = max(2, int(np.ceil((np.sqrt(8 * per_tri + 1) - 3) / 2)))
    bary = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            bary.append((i / m, j / m, (m - i - j) / m))
    bary = np.array(bary)
    tri = ctx.mesh.triangles
    verts = ctx.mesh.vertices
    pts = np.einsum("bk,tkd->tbd", bary, verts[tri]).reshape(-1, 2)
    return pts


def scale_report(ctx, forcing, t_eval, times, kinetic_series, eps_model_series,
                 reynolds, tau, n_samples=10_000):
    """Forcing/velocity scale functionals of a completed run.

    The velocity scale uses the finite-horizon running average of mean |v|^2.
    The length scale takes the minimum of sqrt(|Omega|) (2D substitute for the
    3D volume exponent) and the three forcing-derived candidates; forcing
    derivatives come from central differences, integrated by the fixed
    quadrature rule for the mean-square candidates and maximized over a
    deterministic lattice of about n_samples points for the sup candidate.
    """
    from .errors import ConfigurationError

    fq = forcing.at_points(ctx.qpoints, t_eval)
    f2 = ctx.integrate_scalar_q(fq[:, :, 0] ** 2 + fq[:, :, 1] ** 2) / ctx.total_area
    force_scale = math.sqrt(f2)
    if force_scale <= 0.0:
        raise ConfigurationError("zero forcing has no force scale")

    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise InvalidParameterError("need a time series of at least 2 samples")
    span = times[-1] - times[0]
    mean_v2 = np.trapezoid(2.0 * np.asarray(kinetic_series, dtype=float), times) / span
    velocity_scale = math.sqrt(max(mean_v2, 0.0))

    pts = _sample_points(ctx, n_samples)
    sup_sg = float(_sym_grad_norm_fd(forcing, pts, t_eval).max())
    qp = ctx.qpoints.reshape(-1, 2)
    sg_q = _sym_grad_norm_fd(forcing, qp, t_eval).reshape(ctx.qpoints.shape[:2])
    lap2_q = _laplacian_sq_fd(forcing, qp, t_eval).reshape(ctx.qpoints.shape[:2])
    mean_sg2 = ctx.integrate_scalar_q(sg_q ** 2) / ctx.total_area
    mean_lap2 = ctx.integrate_scalar_q(lap2_q) / ctx.total_area
    candidates = [math.sqrt(ctx.total_area)]
    if sup_sg > 0:
        candidates.append(force_scale / sup_sg)
    if mean_sg2 > 0:
        candidates.append(force_scale / math.sqrt(mean_sg2))
    if mean_lap2 > 0:
        candidates.append(math.sqrt(force_scale / math.sqrt(mean_lap2)))
    length_scale = min(candidates)
    turnover = length_scale / velocity_scale if velocity_scale > 0 else math.inf

    mean_eps_model = float(
        np.trapezoid(np.asarray(eps_model_series, dtype=float), times) / span)
    reference = 4.0 * (1.0 + 1.0 / reynolds) * velocity_scale ** 3 / length_scale
    return ScaleReport(
        force_scale=force_scale,
        velocity_scale=velocity_scale,
        length_scale=length_scale,
        turnover_time=turnover,
        tau_over_turnover=tau / turnover if math.isfinite(turnover) else 0.0,
        dissipation_reference=reference,
        mean_eps_model=mean_eps_model,
    )


def _sym_grad_norm_fd(forcing, pts, t, h=1e-5):
    x, y = pts[:, 0], pts[:, 1]

    def f(xx, yy):
        return forcing(xx, yy, t)

    fx_p, fy_p = f(x + h, y)
    fx_m, fy_m = f(x - h, y)
    fx_q, fy_q = f(x, y + h)
    fx_r, fy_r = f(x, y - h)
    d1dx = (fx_p - fx_m) / (2 * h)
    d2dx = (fy_p - fy_m) / (2 * h)
    d1dy = (fx_q - fx_r) / (2 * h)
    d2dy = (fy_q - fy_r) / (2 * h)
    return np.sqrt(d1dx ** 2 + d2dy ** 2 + 0.5 * (d1dy + d2dx) ** 2)


def _laplacian_sq_fd(forcing, pts, t, h=1e-4):
    x, y = pts[:, 0], pts[:, 1]

    def f(xx, yy):
        return np.stack(forcing(xx, yy, t), axis=-1)

    center = f(x, y)
    lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * center) / h ** 2
    return (lap ** 2).sum(axis=-1)
