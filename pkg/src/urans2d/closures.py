"""Turbulence closures: eddy viscosity laws and TKE state updates.

Four closure variants share one parameter record:

* ``nse``             no model, nu_T = 0
* ``one-eq``          transported TKE field, kinematic length scale:
                      nu_T = sqrt(2) * mu * k(x,t) * tau
* ``one-eq-prandtl``  transported TKE field, wall length scale:
                      nu_T = mu * l(x) * sqrt(k), l = max(kappa * y, l_min)
* ``half-eq``         volume-averaged TKE k(t) from a scalar ODE:
                      nu_T = sqrt(2) * mu * k(t) * (kappa * y / L)^2 * tau
                      (the wall multiplier drops to 1 with wall_multiplier=False,
                      the periodic-boundary form of the law)

The scalar k(t) is carried in extended precision so that strong decay
(small tau) stays strictly positive instead of underflowing to exact zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, NumericalInputError, SolverError

NSE = "nse"
ONE_EQ = "one-eq"
ONE_EQ_PRANDTL = "one-eq-prandtl"
HALF_EQ = "half-eq"
VARIANTS = (NSE, ONE_EQ, ONE_EQ_PRANDTL, HALF_EQ)

HALF_SQRT2 = np.sqrt(2.0) / 2.0


@dataclass
class Closure:
    """Closure selector plus the model constants.

    tau is the time-averaging window, mu the calibration constant, kappa the
    wall-multiplier constant, L the global length scale, l_min the length
    floor used by the Prandtl variant, nu the kinematic viscosity.
    """

    variant: str = NSE
    nu: float = 1e-4
    tau: float = 0.1
    mu: float = 0.55
    kappa: float = 0.41
    L: float = 1.0
    l_min: float = None
    wall_multiplier: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown closure variant {self.variant!r}")
        if self.l_min is None:
            self.l_min = 1e-6 * self.L
        for name in ("nu", "tau", "mu", "kappa", "L"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.l_min < 0:
            raise InvalidParameterError("l_min must be nonnegative")

    @property
    def has_tke(self):
        return self.variant != NSE

    @property
    def uses_field_k(self):
        return self.variant in (ONE_EQ, ONE_EQ_PRANDTL)


class TurbState:
    """TKE state: absent (plain flow), a nodal P1 field, or a scalar k(t)."""

    __slots__ = ("kind", "values", "value")

    def __init__(self, kind, values=None, value=None):
        self.kind = kind
        self.values = values
        self.value = value

    @classmethod
    def absent(cls):
        return cls("absent")

    @classmethod
    def field(cls, values):
        return cls("field", values=np.asarray(values, dtype=float))

    @classmethod
    def scalar(cls, value):
        return cls("scalar", value=np.longdouble(value))

    def k_avg(self, ctx=None):
        """Volume-averaged TKE; field values are clipped at zero first."""
        if self.kind == "absent":
            return 0.0
        if self.kind == "scalar":
            return float(self.value)
        kq = np.maximum(ctx.p1_at_quad(self.values), 0.0)
        return ctx.integrate_scalar_q(kq) / ctx.total_area


def nu_t(closure, k, y=None):
    """Pointwise eddy viscosity law. k and y broadcast; k is clipped at zero."""
    if closure.variant == NSE:
        z = np.zeros_like(np.asarray(k, dtype=float))
        return z if z.ndim else 0.0
    k = np.maximum(k, 0.0)
    if closure.variant == ONE_EQ:
        return np.sqrt(2.0) * closure.mu * k * closure.tau
    if closure.variant == ONE_EQ_PRANDTL:
        length = np.maximum(closure.kappa * y, closure.l_min)
        return closure.mu * length * np.sqrt(k)
    # half-eq
    mult = (closure.kappa * y / closure.L) ** 2 if closure.wall_multiplier else 1.0
    return np.sqrt(2.0) * closure.mu * k * mult * closure.tau


def nu_t_at_quad(closure, turb, ctx, y_q=None):
    """Eddy viscosity at quadrature points: scalar 0.0 or an (nt, nq) array."""
    if closure.variant == NSE or turb.kind == "absent":
        return 0.0
    if closure.uses_field_k and turb.kind != "field":
        raise TypeError(f"closure {closure.variant!r} needs a TKE field, "
                        f"got {turb.kind!r} state")
    if closure.variant == HALF_EQ and turb.kind != "scalar":
        raise TypeError(f"closure {closure.variant!r} needs a scalar TKE, "
                        f"got {turb.kind!r} state")
    if turb.kind == "scalar":
        k = float(turb.value)  # float64; graceful underflow for tiny k(t)
    else:
        k = ctx.p1_at_quad(turb.values)
    if closure.variant == HALF_EQ and not closure.wall_multiplier:
        y_q = None
    return np.broadcast_to(np.asarray(nu_t(closure, k, y_q), dtype=float),
                           (ctx.mesh.n_triangles, ctx.rule.n)).copy()


def total_viscosity_at_quad(closure, turb, ctx, y_q=None):
    """(2 nu + nu_T) at quadrature points, the momentum diffusion coefficient."""
    return 2.0 * closure.nu + np.asarray(nu_t_at_quad(closure, turb, ctx, y_q))


def step_k_ode(k_n, eps, dt, tau):
    """One backward-Euler step of  dk/dt + (sqrt(2)/2) k / tau = eps.

    Evaluated in extended precision; strictly positive whenever k_n > 0.
    """
    if dt <= 0 or tau <= 0:
        raise InvalidParameterError("dt and tau must be positive")
    if k_n < 0:
        raise NumericalInputError(f"k must be nonnegative, got {k_n}")
    if eps < 0:
        raise NumericalInputError(
            f"dissipation source must be nonnegative, got {eps} (upstream bug)")
    k_n = np.longdouble(k_n)
    return (k_n + np.longdouble(dt) * np.longdouble(eps)) / (
        np.longdouble(1.0) + np.longdouble(dt) * HALF_SQRT2 / np.longdouble(tau))


def eps_of(ctx, closure, turb, vel, y_q=None):
    """Volume-averaged eddy dissipation (1/|Omega|) integral nu_T |symgrad v|^2."""
    nut_q = nu_t_at_quad(closure, turb, ctx, y_q)
    if np.ndim(nut_q) == 0 and nut_q == 0.0:
        return 0.0
    val = ctx.integrate("symgradsq", vel, weight=nut_q) / ctx.total_area
    return max(val, 0.0)


def step_k_pde(ctx, closure, vel_new, turb, dt, y_q=None):
    """One backward-Euler step of the TKE transport equation.

    The eddy viscosity and the production source nu_T |symgrad v_new|^2 are
    evaluated from the previous TKE field (lagged linearization); the Prandtl
    variant uses the semi-implicit reaction sqrt(max(k_old,0))/l(x) * k_new.
    Walls are homogeneous Dirichlet.
    """
    from .fem import scalar_transport_system
    from scipy.sparse.linalg import splu

    k_old = turb.values
    nut_q = nu_t_at_quad(closure, turb, ctx, y_q)
    src_q = np.asarray(nut_q) * ctx.sym_grad_sq_at_quad(vel_new)
    reaction_q = None
    if closure.variant == ONE_EQ_PRANDTL:
        k_q = np.maximum(ctx.p1_at_quad(k_old), 0.0)
        length_q = np.maximum(closure.kappa * y_q, closure.l_min)
        reaction_q = np.sqrt(k_q) / length_q
    k_mat, rhs = scalar_transport_system(
        ctx, vel_new, nut_q, dt, closure.tau, src_q, k_old, reaction_q=reaction_q)
    try:
        lu = splu(k_mat)
        k_new = lu.solve(rhs)
    except RuntimeError as err:
        raise SolverError(f"TKE transport solve failed: {err}") from err
    res = np.linalg.norm(k_mat @ k_new - rhs)
    if not np.isfinite(res) or res > 1e-6 * max(1.0, np.linalg.norm(rhs)):
        raise SolverError(f"TKE transport solve residual too large: {res:.3e}")
    return TurbState.field(k_new)


def init_k(ctx, ydist, closure, reynolds):
    """TKE initialization from the wall-distance-limited length scale.

    l(x) = min(kappa * y, 0.082 / sqrt(Re)), k = l^2 / (2 tau^2); the field
    variants take the nodal interpolant, the scalar variant the quadrature
    volume average.
    """
    if reynolds <= 0:
        raise InvalidParameterError("Reynolds number must be positive")
    cap = 0.082 / np.sqrt(reynolds)

    def k_of_y(y):
        length = np.minimum(closure.kappa * y, cap)
        return length ** 2 / (2.0 * closure.tau ** 2)

    if closure.uses_field_k:
        return TurbState.field(k_of_y(ydist.vertex_values))
    k_q = k_of_y(ydist.at_points(ctx.qpoints))
    return TurbState.scalar(ctx.integrate_scalar_q(k_q) / ctx.total_area)
