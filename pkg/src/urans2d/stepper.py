"""Coupled time stepping: Picard momentum solve, time filter, TKE update.

One advance performs, in order: evaluate the eddy viscosity from the TKE
state at t_n (frozen through the nonlinear iteration), solve the momentum
saddle-point system by Picard fixed-point iteration on the transport
velocity, optionally apply the second-difference time filter to the velocity,
update the TKE state once the activation time is reached, and evaluate the
statistics record.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import closures, statistics
from .closures import TurbState
from .errors import InvalidParameterError, SolverError
from .fem import (AssemblyContext, FlowState, MomentumStep, SaddleSolver,
                  build_dofmap)
from .mesh import wall_distance


@dataclass
class StepperConfig:
    dt: float
    picard_tol: float = 1e-9
    picard_max: int = 25
    filter_on: bool = True
    t_star: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidParameterError("dt must be positive")
        if self.picard_tol <= 0:
            raise InvalidParameterError("picard_tol must be positive")
        if self.picard_max < 1:
            raise InvalidParameterError("picard_max must be at least 1")


@dataclass
class SimulationState:
    t: float
    n: int
    flow: FlowState
    flow_prev: FlowState            # state at t_{n-1}, for the filter
    turb: TurbState
    have_two_levels: bool = False   # filter needs three consecutive states


def time_filter(v_new, v_n, v_nm1):
    """Second-difference correction v - (v - 2 v_n + v_nm1) / 3.

    Exact on sequences linear in time; applied to velocity dofs only.
    """
    return v_new - (v_new - 2.0 * v_n + v_nm1) / 3.0


class Simulation:
    """Owns the mesh-bound machinery and the marching state for one run."""

    def __init__(self, mesh, closure, forcing, cfg, u_ref=1.0):
        self.mesh = mesh
        self.closure = closure
        self.forcing = forcing
        self.cfg = cfg
        self.dofs = build_dofmap(mesh)
        self.ctx = AssemblyContext(mesh, self.dofs)
        self.reynolds = u_ref * closure.L / closure.nu
        if closure.has_tke:
            self.ydist = wall_distance(mesh)
            self.y_q = self.ydist.at_points(self.ctx.qpoints)
        else:
            self.ydist = None
            self.y_q = None
        zero = FlowState(np.zeros(self.dofs.n_vel), np.zeros(self.dofs.n_pre))
        self.state = SimulationState(
            t=0.0, n=0, flow=zero, flow_prev=zero.copy(), turb=TurbState.absent())
        self.max_energy_plus_k = 0.0
        self.solver = SaddleSolver()
        self._profile_q = forcing.profile_at(self.ctx.qpoints) if forcing.separable else None

    def _force_at_quad(self, t):
        if self._profile_q is not None:
            return self.forcing.ramp(t) * self._profile_q
        return self.forcing.at_points(self.ctx.qpoints, t)

    # -- momentum ---------------------------------------------------------------

    def picard_momentum_solve(self, nut_q, t_new, bc_values=None, trace=None):
        """Fixed-point iteration on the transport velocity at the new time level.

        Starts from the current velocity; the eddy viscosity stays frozen.
        Returns (FlowState, iterations, converged); `trace`, when given,
        collects the relative increment norms.
        """
        cfg = self.cfg
        ctx = self.ctx
        coeff_q = 2.0 * self.closure.nu + np.asarray(nut_q)
        force_q = self._force_at_quad(t_new)
        step = MomentumStep(ctx, coeff_q, cfg.dt, self.state.flow.vel, force_q,
                            bc_values=bc_values)
        w = self.state.flow.vel
        flow = None
        converged = False
        iters = 0
        # Anderson-accelerated fixed point on the transport velocity: the plain
        # iteration oscillates through several slow modes once the flow
        # develops, and mixing the recent residuals damps them together. The
        # returned state is always a raw solve output, so the discrete
        # momentum system holds for it exactly.
        hist_w, hist_r = [], []
        depth = 4
        for iters in range(1, cfg.picard_max + 1):
            sol = self.solver.solve(step.matrix(w), step.rhs)
            if not np.all(np.isfinite(sol)):
                raise SolverError("saddle-point solve produced non-finite values")
            nvel = self.dofs.n_vel
            flow = FlowState(sol[:nvel], sol[nvel:nvel + self.dofs.n_pre])
            res = flow.vel - w
            rel = np.linalg.norm(res) / max(np.linalg.norm(flow.vel), 1e-30)
            if trace is not None:
                trace.append(rel)
            if rel <= cfg.picard_tol:
                converged = True
                break
            hist_w.append(w)
            hist_r.append(res)
            if len(hist_r) > depth + 1:
                hist_w.pop(0)
                hist_r.pop(0)
            w_next = w + res
            if len(hist_r) >= 2:
                dr = np.stack([hist_r[i + 1] - hist_r[i]
                               for i in range(len(hist_r) - 1)], axis=1)
                dw = np.stack([hist_w[i + 1] - hist_w[i]
                               for i in range(len(hist_w) - 1)], axis=1)
                gamma = np.linalg.lstsq(dr, res, rcond=1e-10)[0]
                cand = w_next - (dw + dr) @ gamma
                if np.all(np.isfinite(cand)):
                    w_next = cand
            w = w_next
        return flow, iters, converged

    # -- one coupled step ---------------------------------------------------------

    def advance(self, record_stats=True):
        """Advance one step of size dt; returns the StatsRecord for the new level."""
        cfg = self.cfg
        st = self.state
        t_new = (st.n + 1) * cfg.dt

        nut_q = closures.nu_t_at_quad(self.closure, st.turb, self.ctx, self.y_q)
        bc_values = self._wall_values(t_new)
        flow_new, iters, converged = self.picard_momentum_solve(
            nut_q, t_new, bc_values=bc_values)
        if not converged and cfg.picard_tol < np.inf:
            warnings.warn(
                f"Picard iteration reached picard_max={cfg.picard_max} at t={t_new:.6g}",
                RuntimeWarning, stacklevel=2)

        if cfg.filter_on and st.have_two_levels:
            flow_new = FlowState(
                time_filter(flow_new.vel, st.flow.vel, st.flow_prev.vel), flow_new.pre)

        turb_old = st.turb
        turb_budget_old = turb_old
        turb_new = turb_old
        eps_used = 0.0
        if self.closure.has_tke and t_new >= cfg.t_star - 1e-9 * cfg.dt:
            if turb_old.kind == "absent":
                # activation: k(t_star) is an initial condition, not an update,
                # so this step's budget still pairs the pre-activation states
                turb_new = closures.init_k(self.ctx, self.ydist, self.closure, self.reynolds)
                turb_budget_old = turb_old
                turb_budget_new = turb_old
            else:
                eps_used = closures.eps_of(
                    self.ctx, self.closure, turb_old, flow_new.vel, self.y_q)
                if self.closure.uses_field_k:
                    turb_new = closures.step_k_pde(
                        self.ctx, self.closure, flow_new.vel, turb_old, cfg.dt, self.y_q)
                else:
                    turb_new = TurbState.scalar(closures.step_k_ode(
                        turb_old.value, eps_used, cfg.dt, self.closure.tau))
                turb_budget_new = turb_new
        else:
            turb_budget_new = turb_old

        record = self._make_record(
            t_new, flow_new, turb_budget_old, turb_budget_new, turb_new,
            eps_used, iters, converged) if record_stats else None

        st.flow_prev = st.flow
        st.flow = flow_new
        st.turb = turb_new
        st.n += 1
        st.t = t_new
        if st.n >= 2:
            st.have_two_levels = True
        return record

    def _wall_values(self, t_new):
        """Dirichlet values on wall velocity dofs; nonzero only for manufactured flows."""
        if not hasattr(self.forcing, "exact_velocity"):
            return None
        mesh = self.mesh
        nodes = np.concatenate([mesh.vertices, mesh.edge_midpoints()])
        wall = self.dofs.wall_scalar_dofs
        vx, vy = self.forcing.exact_velocity(nodes[wall, 0], nodes[wall, 1], t_new)
        return np.concatenate([vx, vy])

    def _make_record(self, t_new, flow_new, turb_budget_old, turb_budget_new,
                     turb_new, eps_used, iters, converged):
        ctx, closure = self.ctx, self.closure
        st = self.state
        force_q = self._force_at_quad(t_new)
        terms = statistics.budget_terms(
            ctx, closure, flow_new, st.flow, turb_budget_new, turb_budget_old,
            self.cfg.dt, force_q, self.y_q)
        residual = float(sum(terms.values()))
        budget_scale = max(abs(v) for v in terms.values())
        record = statistics.StatsRecord(
            t=t_new,
            kinetic_energy=statistics.kinetic_energy(ctx, flow_new.vel),
            enstrophy=statistics.enstrophy(ctx, flow_new.vel),
            taylor_microscale=statistics.taylor_microscale(ctx, flow_new.vel),
            turbulence_intensity=statistics.turbulence_intensity(ctx, turb_new, flow_new.vel),
            k_avg=turb_new.k_avg(ctx),
            eps=eps_used,
            eps_model=statistics.eps_model(ctx, closure, turb_new, flow_new.vel),
            budget_residual=residual,
            picard_iters=iters,
            picard_converged=converged,
        )
        record._budget_scale = budget_scale
        self._monitor(record)
        return record

    def _monitor(self, record):
        """Abort on any non-finite statistic (NaN markers excepted); track the bound."""
        for name in ("kinetic_energy", "enstrophy", "k_avg", "eps",
                     "eps_model", "budget_residual"):
            value = getattr(record, name)
            if not np.isfinite(value):
                raise SolverError(
                    f"statistic {name} became non-finite at t={record.t:.6g}")
        bound = record.kinetic_energy + record.k_avg
        self.max_energy_plus_k = max(self.max_energy_plus_k, bound)
