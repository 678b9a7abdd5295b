"""Body forcings: the rotational benchmark force, zero, and manufactured solutions.

Every forcing is callable as f(x, y, t) -> (fx, fy) with numpy broadcasting,
and provides at_points(points, t) for (..., 2) point arrays. Manufactured
forcings additionally carry the exact velocity/pressure fields; their force is
derived symbolically from the momentum equation with nu_T = 0 and cached as a
vectorized lambda.
"""

import numpy as np

from .errors import ConfigurationError


class Forcing:
    name = "base"
    is_zero = False
    # set when f(x, y, t) = ramp(t) * profile(x, y); lets callers cache the profile
    separable = False

    def __call__(self, x, y, t):
        raise NotImplementedError

    def at_points(self, points, t):
        points = np.asarray(points, dtype=float)
        fx, fy = self(points[..., 0], points[..., 1], t)
        return np.stack(np.broadcast_arrays(fx, fy), axis=-1).astype(float)

    def ramp(self, t):
        return 1.0

    def profile_at(self, points):
        """Spatial factor of a separable forcing at the given points."""
        raise NotImplementedError


class ZeroForcing(Forcing):
    name = "zero"
    is_zero = True
    separable = True

    def __call__(self, x, y, t):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return z, z

    def ramp(self, t):
        return 0.0

    def profile_at(self, points):
        return np.zeros(np.asarray(points).shape)


class OffsetCirclesForcing(Forcing):
    """Counterclockwise swirl, ramped linearly over the first time unit.

    f(x, y, t) = (-4 y min(t,1) (1 - x^2 - y^2), 4 x min(t,1) (1 - x^2 - y^2))
    vanishes at the origin and on the unit circle.
    """

    name = "offset-circles"
    separable = True

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = self.ramp(t) * (1.0 - x * x - y * y)
        return -4.0 * y * shape, 4.0 * x * shape

    def ramp(self, t):
        return min(float(t), 1.0)

    def profile_at(self, points):
        points = np.asarray(points, dtype=float)
        x, y = points[..., 0], points[..., 1]
        shape = 1.0 - x * x - y * y
        return np.stack([-4.0 * y * shape, 4.0 * x * shape], axis=-1)


class ManufacturedForcing(Forcing):
    """Forcing derived from a prescribed exact flow on the unit square.

    profile "trig": divergence-free stream-function flow with homogeneous
    trace, v = g(t) (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y));
    profile "poly": steady v = (y^2, x^2) with inhomogeneous trace, which the
    quadratic velocity space represents exactly.

    time_profile: "steady" (g = 1) or "unsteady" (g = 1 + sin(3 t) / 2).
    """

    def __init__(self, nu, profile="trig", time_profile="steady"):
        import sympy as sp

        if profile not in ("trig", "poly"):
            raise ConfigurationError(f"unknown manufactured profile {profile!r}")
        if time_profile not in ("steady", "unsteady"):
            raise ConfigurationError(f"unknown time profile {time_profile!r}")
        self.name = f"mms-{profile}-{time_profile}"
        self.nu = float(nu)
        self.profile = profile
        self.time_profile = time_profile

        x, y, t = sp.symbols("x y t")
        g = sp.Integer(1) if time_profile == "steady" else 1 + sp.sin(3 * t) / 2
        if profile == "trig":
            v1 = g * sp.sin(sp.pi * x) ** 2 * sp.sin(2 * sp.pi * y)
            v2 = -g * sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) ** 2
            pr = g * sp.sin(sp.pi * x) * sp.cos(sp.pi * y)
        else:
            v1, v2 = g * y ** 2, g * x ** 2
            pr = x + y - 1
        v = sp.Matrix([v1, v2])
        grad = v.jacobian([x, y])
        symgrad = (grad + grad.T) / 2
        stress = 2 * self.nu * symgrad
        f = sp.Matrix([
            sp.diff(v[i], t)
            + v[0] * sp.diff(v[i], x) + v[1] * sp.diff(v[i], y)
            - (sp.diff(stress[i, 0], x) + sp.diff(stress[i, 1], y))
            + sp.diff(pr, [x, y][i])
            for i in range(2)
        ])
        mods = ["numpy"]
        self._force = sp.lambdify((x, y, t), [sp.simplify(f[0]), sp.simplify(f[1])], mods)
        self._vel = sp.lambdify((x, y, t), [v1, v2], mods)
        self._pre = sp.lambdify((x, y, t), pr, mods)

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        fx, fy = self._force(x, np.asarray(y, dtype=float), float(t))
        return np.broadcast_to(np.asarray(fx, dtype=float), x.shape), \
            np.broadcast_to(np.asarray(fy, dtype=float), x.shape)

    def exact_velocity(self, x, y, t):
        x = np.asarray(x, dtype=float)
        v1, v2 = self._vel(x, np.asarray(y, dtype=float), float(t))
        return np.broadcast_to(np.asarray(v1, dtype=float), x.shape), \
            np.broadcast_to(np.asarray(v2, dtype=float), x.shape)

    def exact_pressure(self, x, y, t):
        return np.asarray(self._pre(np.asarray(x, dtype=float),
                                    np.asarray(y, dtype=float), float(t)), dtype=float)


def make_forcing(name, nu=None):
    """Forcing factory keyed by the config-file names."""
    if name == "zero":
        return ZeroForcing()
    if name == "offset-circles":
        return OffsetCirclesForcing()
    if name.startswith("mms-"):
        parts = name.split("-")
        if len(parts) != 3:
            raise ConfigurationError(f"bad manufactured forcing name {name!r}")
        if nu is None:
            raise ConfigurationError("manufactured forcing needs the viscosity")
        return ManufacturedForcing(nu, profile=parts[1], time_profile=parts[2])
    raise ConfigurationError(f"unknown forcing {name!r}")
