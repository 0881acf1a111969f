"""Simulation and equilibrium analysis for a damped ODE coupled to a heat equation.

    v_tt + phi(v) v_t + f(v) = alpha w,     w_t - Lap w + w = v,

with homogeneous Neumann conditions on 1D intervals and 2D rectangles.
"""

__version__ = "0.1.0"

from .errors import (
    BlowUpError, ConfigError, ConvergenceError, DomainError, EvaluationError,
    NumericalError, PerturbativeFailure, ShapeError,
)
from .grid import Grid, make_grid
from .nonlinearity import (
    NonlinearitySpec, ValidationReport, bistable_cubic, from_catalog, monotone_cubic,
    polynomial_spec, validate_assumptions,
)
from .model import FieldState, ForestParams, ForestReduction, SystemParams, forest_reduce
from .operators import HelmholtzSolver, grad_energy, helmholtz_solve, laplacian_apply
from .diagnostics import (
    energy_identity_residual, h1_norm, kato_check, lip_seminorm, lp_norm, lyapunov,
    mollify, phase_norm,
)
from .dynamics import StepperConfig, TrajectoryRecord, simulate, step
from .convergence import manufactured_convergence
from .equilibria import (
    EquilibriumSolution, OdeRootSet, Partition, equilibrium_residual, hyperbolicity_margin,
    invert_f, near_homogeneous_equilibrium, ode_roots, partition_equilibrium,
    solve_monotone_equilibrium,
)
from .perturbation import ForcedOdeProblem, node_stabilization_report, run_perturbed_ode, tv_check

__all__ = [name for name in dir() if not name.startswith("_")]
