"""Numerical laboratory for periodic homogenization of Hamilton-Jacobi equations.

The package solves the rescaled evolution equation

    d_t u + H(x / eps, d_x u) = 0,    u(x, 0) = f(x)

by min-plus dynamic programming on shrinking windows, estimates the effective
Hamiltonian both by long-time averaging of the periodic semigroup and by an
inf-sup search over closed one-forms, measures uniform convergence of the
rescaled solutions to the effective Hopf-Lax solution, and probes the
viscosity-solution machinery (sub/supersolution tests, doubling of variables,
perturbed test functions, uniqueness) numerically.
"""

from .errors import (
    ConfigError,
    CorrectorMismatch,
    DegenerateForms,
    DualRangeExceeded,
    HJLabError,
    NonConvexBlend,
    NotConverged,
    SearchWindowTooSmall,
    TableWindowTooSmall,
    VelocityOutOfWindow,
    WindowExhausted,
)
from .expressions import Expression, parse_expression, zero_expression
from .hamiltonian import (
    HamiltonianModel,
    LagrangianTable,
    SolverConstants,
    custom_model,
    derive_constants,
    dump_table,
    energy_scaled,
    free_model,
    legendre_dual,
    level_set_within_radius,
    load_table,
    mechanical_model,
    pendulum_model,
    quadratic_truncation,
    scaled_lagrangian,
)

__version__ = "0.1.0"
