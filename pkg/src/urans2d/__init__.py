"""2D unstructured incompressible flow solver with eddy-viscosity TKE closures.

Taylor-Hood (quadratic velocity, linear pressure) elements on triangle
meshes, backward Euler time stepping with Picard linearization and an
optional anti-diffusive time filter, three turbulence closures (transported
TKE with kinematic or wall length scale, and a volume-averaged TKE driven by
a scalar ODE), plus the statistics, energy-budget and convergence machinery
used to verify them.
"""

from .closures import Closure, TurbState, eps_of, init_k, nu_t, step_k_ode, step_k_pde
from .config import MeshSpec, RunConfig, config_hash, parse_config, serialize_config
from .fem import AssemblyContext, DofMap, FlowState, build_dofmap, eval_basis
from .mesh import (TriMesh, WallDistanceField, gen_eccentric_annulus,
                   gen_unit_square, read_mesh, wall_distance, write_mesh)
from .statistics import (ScaleReport, StatsRecord, budget_residual,
                         corollary_residual, enstrophy, kinetic_energy,
                         scale_report, taylor_microscale, turbulence_intensity)
from .stepper import Simulation, SimulationState, StepperConfig, time_filter

__version__ = "0.1.0"
