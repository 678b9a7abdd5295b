"""Taylor-Hood (P2/P1) and P1 scalar finite element machinery.

Velocity uses quadratic Lagrange elements (vertex + edge-midpoint dofs, x
block first then y block), pressure and transported scalars use linear
elements on the vertices. Assembly is vectorized over elements for one fixed
quadrature rule; identical inputs always produce bit-identical matrices.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import InvalidParameterError, NumericalInputError, SolverError
from .quadrature import default_rule


@dataclass
class FlowState:
    """Velocity/pressure coefficient vectors at one time level."""

    vel: np.ndarray  # (2 * (nv + ne),)
    pre: np.ndarray  # (nv,)

    def copy(self):
        return FlowState(self.vel.copy(), self.pre.copy())


def eval_basis(kind, point):
    """Shape function values and reference gradients at a reference point.

    Parameters
    ----------
    kind : {"P1", "P2"}
    point : pair of reference coordinates inside the closed reference triangle

    Returns
    -------
    values : (ndof,) array
    grads : (ndof, 2) array of reference-coordinate gradients
    """
    x, y = float(point[0]), float(point[1])
    lam = np.array([1.0 - x - y, x, y])
    if lam.min() < -1e-12:
        raise InvalidParameterError(f"point {(x, y)} is outside the reference triangle")
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if kind == "P1":
        return lam, dlam
    if kind != "P2":
        raise InvalidParameterError(f"unknown element kind {kind!r}")
    vals = np.empty(6)
    grads = np.empty((6, 2))
    for i in range(3):
        vals[i] = lam[i] * (2 * lam[i] - 1)
        grads[i] = (4 * lam[i] - 1) * dlam[i]
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        vals[3 + k] = 4 * lam[i] * lam[j]
        grads[3 + k] = 4 * (lam[i] * dlam[j] + lam[j] * dlam[i])
    return vals, grads


class DofMap:
    """Global dof numbering and Dirichlet sets for one mesh.

    Scalar P2 dofs: vertex i -> i, edge e -> nv + e. Velocity dofs stack the
    x component first: component d of scalar dof s is d * n_scalar + s.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        nv, ne = mesh.n_vertices, mesh.n_edges
        self.n_scalar = nv + ne
        self.n_vel = 2 * self.n_scalar
        self.n_pre = nv
        self.n_k = nv
        # local P2 ordering: three vertices then midpoints of (0,1), (1,2), (2,0)
        self.loc2glob_p2 = np.concatenate(
            [mesh.triangles, nv + mesh.tri_edges], axis=1).astype(np.int64)
        wall_scalar = np.concatenate(
            [mesh.wall_vertex_ids(), nv + mesh.wall_edge_ids]).astype(np.int64)
        self.wall_scalar_dofs = np.unique(wall_scalar)
        self.wall_vel_dofs = np.concatenate(
            [self.wall_scalar_dofs, self.n_scalar + self.wall_scalar_dofs])
        self.wall_k_dofs = mesh.wall_vertex_ids()


def build_dofmap(mesh):
    return DofMap(mesh)


def _coo(data, rows, cols, shape):
    return sparse.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


class AssemblyContext:
    """Per-mesh tables for quadrature, basis values and global assembly.

    All bilinear forms below integrate with one fixed rule (degree 6), so
    energies computed from the same context pair exactly with the assembled
    matrices.
    """

    def __init__(self, mesh, dofs=None, rule=None):
        self.mesh = mesh
        self.dofs = dofs or DofMap(mesh)
        self.rule = rule or default_rule()
        nq = self.rule.n

        tri = mesh.triangles
        verts = mesh.vertices
        p0 = verts[tri[:, 0]]
        jac = np.stack([verts[tri[:, 1]] - p0, verts[tri[:, 2]] - p0], axis=2)  # (nt,2,2) columns
        self.detj = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]   # = 2 * area
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= self.detj[:, None, None]
        self.jinv = inv  # d xi / d x

        pts, self.wq = self.rule.points, self.rule.weights
        self.phi2 = np.empty((nq, 6))
        ghat2 = np.empty((nq, 6, 2))
        self.phi1 = np.empty((nq, 3))
        ghat1 = np.empty((nq, 3, 2))
        for q, pt in enumerate(pts):
            self.phi2[q], ghat2[q] = eval_basis("P2", pt)
            self.phi1[q], ghat1[q] = eval_basis("P1", pt)
        # physical gradients: grad_x N = jinv^T @ grad_xi N
        self.grad2 = np.einsum("ted,qie->tqid", self.jinv, ghat2)   # (nt,nq,6,2)
        self.grad1 = np.einsum("ted,ie->tid", self.jinv, ghat1[0])  # (nt,3,2), constant in q
        self.qw = self.wq[None, :] * self.detj[:, None]             # (nt,nq) dx weights
        self.qpoints = p0[:, None, :] + np.einsum("tde,qe->tqd", jac, pts)  # (nt,nq,2)

        lg = self.dofs.loc2glob_p2
        self._r2 = np.broadcast_to(lg[:, :, None], (len(tri), 6, 6))
        self._c2 = np.broadcast_to(lg[:, None, :], (len(tri), 6, 6))
        self._r1 = np.broadcast_to(tri[:, :, None], (len(tri), 3, 3))
        self._c1 = np.broadcast_to(tri[:, None, :], (len(tri), 3, 3))
        self._cache = {}

    @property
    def total_area(self):
        return self.mesh.total_area

    # -- field evaluation at quadrature points --------------------------------

    def vel_at_quad(self, vel):
        """(nt, nq, 2) velocity values."""
        n = self.dofs.n_scalar
        loc = self.dofs.loc2glob_p2
        ux = vel[loc]          # (nt,6)
        uy = vel[n + loc]
        vals = np.empty((len(loc), self.rule.n, 2))
        vals[:, :, 0] = np.einsum("qi,ti->tq", self.phi2, ux)
        vals[:, :, 1] = np.einsum("qi,ti->tq", self.phi2, uy)
        return vals

    def vel_grad_at_quad(self, vel):
        """(nt, nq, 2, 2) gradients g[..., a, b] = d v_a / d x_b."""
        n = self.dofs.n_scalar
        loc = self.dofs.loc2glob_p2
        g = np.empty((len(loc), self.rule.n, 2, 2))
        g[:, :, 0, :] = np.einsum("tqid,ti->tqd", self.grad2, vel[loc])
        g[:, :, 1, :] = np.einsum("tqid,ti->tqd", self.grad2, vel[n + loc])
        return g

    def p1_at_quad(self, values):
        return np.einsum("qi,ti->tq", self.phi1, values[self.mesh.triangles])

    def sym_grad_sq_at_quad(self, vel):
        g = self.vel_grad_at_quad(vel)
        return (g[:, :, 0, 0] ** 2 + g[:, :, 1, 1] ** 2
                + 0.5 * (g[:, :, 0, 1] + g[:, :, 1, 0]) ** 2)

    def curl_sq_at_quad(self, vel):
        g = self.vel_grad_at_quad(vel)
        return (g[:, :, 1, 0] - g[:, :, 0, 1]) ** 2

    # -- matrices --------------------------------------------------------------

    def mass_p2(self):
        """Scalar P2 mass matrix (cached)."""
        if "mass_p2" not in self._cache:
            mref = np.einsum("q,qi,qj->ij", self.wq, self.phi2, self.phi2)
            data = self.detj[:, None, None] * mref[None, :, :]
            n = self.dofs.n_scalar
            self._cache["mass_p2"] = _coo(data, self._r2, self._c2, (n, n))
        return self._cache["mass_p2"]

    def mass_vel(self):
        """Vector P2 mass (block diagonal, cached)."""
        if "mass_vel" not in self._cache:
            m = self.mass_p2()
            self._cache["mass_vel"] = sparse.block_diag([m, m], format="csr")
        return self._cache["mass_vel"]

    def viscous_vel(self, coeff):
        """Vector form  integral coeff * symgrad(u) : symgrad(phi).

        coeff is a scalar or an (nt, nq) array of quadrature-point values;
        it must be finite everywhere. Constant-coefficient matrices are cached.
        """
        if np.ndim(coeff) == 0:
            key = ("viscous_const", float(coeff))
            if key not in self._cache:
                self._cache[key] = self._viscous_vel_impl(coeff)
            return self._cache[key]
        return self._viscous_vel_impl(coeff)

    def _viscous_vel_impl(self, coeff):
        coeff_q = self._coeff_q(coeff, "viscous coefficient")
        w = self.qw * coeff_q
        gx = self.grad2[:, :, :, 0]
        gy = self.grad2[:, :, :, 1]
        xx = np.einsum("tq,tqi,tqj->tij", w, gx, gx)
        yy = np.einsum("tq,tqi,tqj->tij", w, gy, gy)
        xy = np.einsum("tq,tqi,tqj->tij", w, gy, gx)  # (i from x-block, j from y-block)
        a11 = xx + 0.5 * yy
        a22 = yy + 0.5 * xx
        a12 = 0.5 * xy
        a21 = 0.5 * np.swapaxes(xy, 1, 2)
        return self._vector_block(a11, a12, a21, a22)

    def convection_vel(self, vel_lag):
        """Skew-symmetrized convection with transport velocity vel_lag.

        N_ij = 0.5 [ (w . grad phi_j, phi_i) - (w . grad phi_i, phi_j) ]; the
        same block acts on both velocity components.
        """
        wvals = self.vel_at_quad(vel_lag)
        wdotg = np.einsum("tqd,tqid->tqi", wvals, self.grad2)
        c = np.einsum("tq,qi,tqj->tij", self.qw, self.phi2, wdotg)
        n = 0.5 * (c - np.swapaxes(c, 1, 2))
        nsc = self.dofs.n_scalar
        m = _coo(n, self._r2, self._c2, (nsc, nsc))
        return sparse.block_diag([m, m], format="csr")

    def div_matrix(self):
        """G[i, m] = integral psi_m * d_d phi_i  for velocity dof i of component d (cached)."""
        if "div" not in self._cache:
            nsc, npre = self.dofs.n_scalar, self.dofs.n_pre
            lg = self.dofs.loc2glob_p2
            tri = self.mesh.triangles
            rows = np.broadcast_to(lg[:, :, None], (len(tri), 6, 3))
            cols = np.broadcast_to(tri[:, None, :], (len(tri), 6, 3))
            gx = np.einsum("tq,tqi,qm->tim", self.qw, self.grad2[:, :, :, 0], self.phi1)
            gy = np.einsum("tq,tqi,qm->tim", self.qw, self.grad2[:, :, :, 1], self.phi1)
            bx = _coo(gx, rows, cols, (nsc, npre))
            by = _coo(gy, rows, cols, (nsc, npre))
            self._cache["div"] = sparse.vstack([bx, by], format="csr")
        return self._cache["div"]

    def div_rows_constrained(self):
        """Negated pressure-gradient block with wall velocity rows zeroed (cached)."""
        if "div_rows" not in self._cache:
            self._cache["div_rows"] = constrain_rows(
                -self.div_matrix(), self.dofs.wall_vel_dofs, identity=False)
        return self._cache["div_rows"]

    def pressure_integral(self):
        """Vector of integrals of the P1 pressure basis functions (cached)."""
        if "pint" not in self._cache:
            vals = np.einsum("tq,qm->tm", self.qw, self.phi1)
            c = np.zeros(self.dofs.n_pre)
            np.add.at(c, self.mesh.triangles.ravel(), vals.ravel())
            self._cache["pint"] = c
        return self._cache["pint"]

    def load_vel(self, force_q):
        """Velocity load vector from (nt, nq, 2) force values at quadrature points."""
        self._require_finite(force_q, "force")
        fe = np.einsum("tq,tqd,qi->tid", self.qw, force_q, self.phi2)
        out = np.zeros(self.dofs.n_vel)
        lg = self.dofs.loc2glob_p2
        np.add.at(out, lg.ravel(), fe[:, :, 0].ravel())
        np.add.at(out, (self.dofs.n_scalar + lg).ravel(), fe[:, :, 1].ravel())
        return out

    def mass_p1(self):
        if "mass_p1" not in self._cache:
            mref = np.einsum("q,qi,qj->ij", self.wq, self.phi1, self.phi1)
            data = self.detj[:, None, None] * mref[None, :, :]
            n = self.dofs.n_pre
            self._cache["mass_p1"] = _coo(data, self._r1, self._c1, (n, n))
        return self._cache["mass_p1"]

    def weighted_mass_p1(self, coeff):
        coeff_q = self._coeff_q(coeff, "reaction coefficient")
        data = np.einsum("tq,qi,qj->tij", self.qw * coeff_q, self.phi1, self.phi1)
        n = self.dofs.n_pre
        return _coo(data, self._r1, self._c1, (n, n))

    def diffusion_p1(self, coeff):
        coeff_q = self._coeff_q(coeff, "diffusion coefficient")
        w = (self.qw * coeff_q).sum(axis=1) if np.ndim(coeff_q) else self.qw.sum(axis=1) * coeff_q
        # P1 gradients are constant per element, so the q sum collapses
        data = np.einsum("t,tid,tjd->tij", w, self.grad1, self.grad1)
        n = self.dofs.n_pre
        return _coo(data, self._r1, self._c1, (n, n))

    def convection_p1(self, vel):
        """C[i, j] = integral (v . grad psi_j) psi_i with P2 transport velocity."""
        wvals = self.vel_at_quad(vel)
        wdotg = np.einsum("tqd,tjd->tqj", wvals, self.grad1)
        data = np.einsum("tq,qi,tqj->tij", self.qw, self.phi1, wdotg)
        n = self.dofs.n_pre
        return _coo(data, self._r1, self._c1, (n, n))

    def load_p1(self, src_q):
        self._require_finite(src_q, "source")
        fe = np.einsum("tq,qi->ti", self.qw * src_q, self.phi1)
        out = np.zeros(self.dofs.n_pre)
        np.add.at(out, self.mesh.triangles.ravel(), fe.ravel())
        return out

    # -- functionals ------------------------------------------------------------

    def integrate(self, kind, vel=None, weight=None, force_q=None):
        """Integral over the mesh of the requested density.

        kind: "l2sq" |v|^2, "symgradsq" |symgrad v|^2, "curlsq" |curl v|^2,
        "dot" f . v (force_q required). weight multiplies the density at
        quadrature points (scalar or (nt, nq)).
        """
        if kind == "l2sq":
            vals = self.vel_at_quad(vel)
            dens = vals[:, :, 0] ** 2 + vals[:, :, 1] ** 2
        elif kind == "symgradsq":
            dens = self.sym_grad_sq_at_quad(vel)
        elif kind == "curlsq":
            dens = self.curl_sq_at_quad(vel)
        elif kind == "dot":
            vals = self.vel_at_quad(vel)
            dens = np.einsum("tqd,tqd->tq", force_q, vals)
        else:
            raise InvalidParameterError(f"unknown functional kind {kind!r}")
        if weight is not None:
            dens = dens * weight
        return float(np.einsum("tq,tq->", self.qw, dens))

    def integrate_scalar_q(self, dens_q):
        """Integral of values given directly at quadrature points."""
        return float(np.einsum("tq,tq->", self.qw, dens_q))

    # -- helpers ----------------------------------------------------------------

    def _vector_block(self, a11, a12, a21, a22):
        nsc = self.dofs.n_scalar
        n = self.dofs.n_vel
        r, c = self._r2, self._c2
        rows = np.concatenate([r, r, nsc + r, nsc + r], axis=0)
        cols = np.concatenate([c, nsc + c, c, nsc + c], axis=0)
        data = np.concatenate([a11, a12, a21, a22], axis=0)
        return _coo(data, rows, cols, (n, n))

    def _coeff_q(self, coeff, what):
        if np.ndim(coeff) == 0:
            if not np.isfinite(coeff):
                raise NumericalInputError(f"{what} is not finite")
            return float(coeff)
        coeff = np.asarray(coeff)
        self._require_finite(coeff, what)
        return coeff

    def _require_finite(self, arr, what):
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(np.asarray(arr)))
            elem = int(bad[0][0]) if bad.size else -1
            raise NumericalInputError(f"non-finite {what} at quadrature point of element {elem}")


# -- boundary conditions and the saddle-point system ----------------------------

_SPLU_OPTIONS = dict(permc_spec="MMD_AT_PLUS_A",
                     options=dict(SymmetricMode=True, DiagPivotThresh=0.1))


class SaddleSolver:
    """Direct solve with factorization reuse across nearby systems.

    The matrix changes little between Picard iterations and between time
    steps (convection and eddy-viscosity drift), so the last LU factorization
    is reused as a defect-correction preconditioner. Every returned solution
    is iterated to a relative residual below `tol` against the *current*
    matrix; the solver refactorizes whenever the correction stalls.
    """

    def __init__(self, tol=1e-13, max_refine=10):
        self.tol = tol
        self.max_refine = max_refine
        self._lu = None
        self.factorizations = 0

    def factorize(self, matrix):
        from scipy.sparse.linalg import splu

        try:
            self._lu = splu(matrix, **_SPLU_OPTIONS)
        except RuntimeError as err:
            raise SolverError(f"sparse factorization failed: {err}") from err
        self.factorizations += 1

    def solve(self, matrix, rhs):
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return np.zeros_like(rhs)
        if self._lu is None:
            self.factorize(matrix)
        x = self._lu.solve(rhs)
        for _ in range(self.max_refine):
            res = rhs - matrix @ x
            if np.linalg.norm(res) <= self.tol * scale:
                return x
            x = x + self._lu.solve(res)
        # stalled: the cached factorization is too far from the current matrix
        self.factorize(matrix)
        x = self._lu.solve(rhs)
        res = rhs - matrix @ x
        if np.linalg.norm(res) > 10 * self.tol * scale:
            x = x + self._lu.solve(res)
            res = rhs - matrix @ x
        if not np.all(np.isfinite(x)) or np.linalg.norm(res) > 100 * self.tol * scale:
            raise SolverError(
                f"saddle solve residual {np.linalg.norm(res) / scale:.3e} "
                f"exceeds tolerance after refactorization")
        return x


def constrain_rows(matrix, fixed_dofs, identity=True):
    """Zero the given rows; optionally put 1 on their diagonal."""
    n = matrix.shape[0]
    keep = np.ones(n)
    keep[fixed_dofs] = 0.0
    out = sparse.diags(keep) @ matrix
    if identity:
        ones = np.zeros(n)
        ones[fixed_dofs] = 1.0
        out = out + sparse.diags(ones)
    return out.tocsr()


class MomentumStep:
    """One time step's momentum systems, with the iteration-invariant parts cached.

    Blocks: (1/dt) mass + skew convection (transport velocity changes per
    Picard iteration) + viscous form with coefficient coeff_q
    (= 2 nu + nu_T at quadrature points, frozen for the step), divergence and
    pressure-gradient coupling, and one mean-zero pressure constraint row.
    Wall velocity dofs are constrained to bc_values (0 if omitted); unknowns
    are ordered [velocity, pressure, mean multiplier].
    """

    def __init__(self, ctx, coeff_q, dt, vel_old, force_q, bc_values=None):
        dofs = ctx.dofs
        self.ctx = ctx
        mass = ctx.mass_vel()
        fixed = dofs.wall_vel_dofs
        keep = np.ones(dofs.n_vel)
        keep[fixed] = 0.0
        self._proj = sparse.diags(keep)
        self._base = constrain_rows(mass * (1.0 / dt) + ctx.viscous_vel(coeff_q), fixed)
        g = ctx.div_matrix()
        self._g_rows = ctx.div_rows_constrained()
        self._gt = g.T.tocsr()
        self._csp = sparse.csr_matrix(ctx.pressure_integral()[:, None])
        rhs_v = mass @ vel_old / dt + ctx.load_vel(force_q)
        rhs_v[fixed] = 0.0 if bc_values is None else bc_values
        self.rhs = np.concatenate([rhs_v, np.zeros(dofs.n_pre + 1)])

    def matrix(self, vel_lag):
        """CSC saddle matrix for the given transport velocity."""
        a = self._base + self._proj @ self.ctx.convection_vel(vel_lag)
        return sparse.bmat(
            [[a, self._g_rows, None],
             [self._gt, None, self._csp],
             [None, self._csp.T, None]], format="csc")


def momentum_system(ctx, coeff_q, dt, vel_old, vel_lag, force_q, bc_values=None):
    """Backward-Euler saddle-point system for one momentum solve; see MomentumStep."""
    step = MomentumStep(ctx, coeff_q, dt, vel_old, force_q, bc_values=bc_values)
    return step.matrix(vel_lag), step.rhs


def scalar_transport_system(ctx, vel, nut_q, dt, tau, src_q, k_old, reaction_q=None):
    """Backward-Euler system for the transported TKE scalar.

    (1/dt) M + C(vel) + D(nut) + R with R = (sqrt(2)/2) / tau * M by default or
    a weighted mass with the given reaction coefficient. Homogeneous Dirichlet
    rows on wall vertices. Returns (K csc, rhs).
    """
    mass = ctx.mass_p1()
    a = mass * (1.0 / dt) + ctx.convection_p1(vel) + ctx.diffusion_p1(nut_q)
    if reaction_q is None:
        a = a + mass * (np.sqrt(2.0) / 2.0 / tau)
    else:
        a = a + ctx.weighted_mass_p1(reaction_q)
    rhs = mass @ k_old / dt + ctx.load_p1(src_q)
    fixed = ctx.dofs.wall_k_dofs
    a = constrain_rows(a, fixed)
    rhs[fixed] = 0.0
    return a.tocsc(), rhs
