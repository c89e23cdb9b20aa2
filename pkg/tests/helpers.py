from math import isclose, isnan, log

import numpy as np

from fracstefan import FluxSpec, Grid, StefanProblem, build_weights, solve_fbp


def nan_close(first, second, *, rel_tol=1e-9, abs_tol=0.0):
    if isnan(first):
        return isnan(second)
    else:
        return isclose(first, second, rel_tol=rel_tol, abs_tol=abs_tol)


###############################################################################

# Utilities for convergence studies


def observed_orders(errors, ratio=2.0):
    """
    Observed orders of a sequence of errors obtained with step sizes
    divided by ratio at each level.
    """
    return [log(coarse / fine) / log(ratio) for coarse, fine in zip(errors, errors[1:])]


def max_error(values, reference, where=None):
    """
    Max-norm of values - reference, restricted to the mask where.
    """
    diff = np.abs(np.asarray(values) - np.asarray(reference))
    if where is not None:
        diff = diff[where]
    return float(np.max(diff))


###############################################################################

# Small runs shared by several test modules


def constant_flux_run(
    alpha=0.5, h0=1.0, b=0.5, n_cells=64, dt=1e-2, horizon=0.5, output_every=5, **kwargs
):
    """
    Free-boundary run with a constant flux and u0 = 0.
    """
    problem = StefanProblem(alpha=alpha, flux=FluxSpec.constant(h0), b=b, horizon=horizon)
    grid = Grid(n_cells)
    return solve_fbp(
        problem, grid, build_weights(alpha, grid), dt, output_every=output_every, **kwargs
    )
