"""
Solver for the one-phase space-fractional Stefan problem.

The temperature u(x, t) lives on [0, s(t)] and satisfies

    u_t = d/dx D^alpha_x u,        0 < x < s(t),
    -D^alpha_x u(0, t) = h(t),     u(s(t), t) = 0,
    s'(t) = -D^alpha_x u(s(t), t),

where D^alpha_x (0 < alpha < 1) is the Caputo derivative in space, so
that the flux law is non-local. The front starts at s(0) = b, and the
zero initial domain b = 0 is reached as the limit b = 1/m -> 0.

Main entry points:

- solve_fbp(): free-boundary solve by time marching;
- fixed_point_P(): the same problem by iteration on the front;
- solve_b_zero(): zero initial domain, with extrapolation in 1/m;
- AnalyticBenchmark: the exact self-similar solution for
  h(t) = h0 t^(-alpha/(1+alpha)), whose front is eta t^(1/(1+alpha));
- run_checks(): qualitative properties (positivity, upper envelope,
  boundary behavior, front velocity bounds) of a computed run.

Example:

    >>> from fracstefan import (
    ...     FluxSpec, Grid, StefanProblem, build_weights, solve_fbp)
    >>> problem = StefanProblem(alpha=0.5, flux=FluxSpec.constant(1), b=0.25)
    >>> grid = Grid(64)
    >>> run = solve_fbp(problem, grid, build_weights(0.5, grid), dt=1e-2)
    >>> run.s_final > 0.25
    True

The fracstefan command-line program exposes the same functionality
(solve, bzero, benchmark, eta, verify and sweep subcommands) and writes
CSV and JSON artifacts.

The package logs through the standard logging module, under the
"fracstefan" logger; nothing is printed unless the application
configures a handler.

This software is released under the BSD license.
"""

import logging

from .errors import *  # noqa
from .fbp import (  # noqa
    BZeroSweep,
    FbpRun,
    fixed_point_P,
    richardson,
    solve_b_zero,
    solve_fbp,
    stefan_residual,
    time_grid,
)
from .fracops import (  # noqa
    FracWeights,
    Grid,
    build_weights,
    caputo_derivative,
    faces_to_nodes,
    flux_divergence,
    frac_integral,
    frac_integral_right,
    rl_derivative,
)
from .mbp import (  # noqa
    FluxSpec,
    FrontPath,
    InitialProfile,
    SingularSplit,
    SolutionField,
    StefanProblem,
    build_split,
    front_flux,
    solve_mbp,
    step,
    transformed_source,
)
from .mlf import (  # noqa
    AnalyticBenchmark,
    MLParams,
    analytic_mass,
    analytic_pair,
    analytic_residual,
    eta_solve,
    h_alpha,
    kilbas_saigo,
    ml3,
    similarity_profile,
)
from .props import PropertyReport, run_checks  # noqa

try:
    from .version import __version__, __version_tuple__  # noqa
except ImportError:  # Source tree without a build
    __version__, __version_tuple__ = "0+unknown", (0, "unknown")

logging.getLogger(__name__).addHandler(logging.NullHandler())
