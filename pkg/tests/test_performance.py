from math import log10
import time
import timeit

import numpy as np
import pytest

from fracstefan import Grid, build_weights, build_split, caputo_derivative, eta_solve, fracops, step


def repeated_flux(n_cells, repetitions=20):
    """
    Apply the discrete Caputo flux repeatedly on a grid of n_cells cells.
    The weight table is built (and cached) once.
    """
    grid = Grid(n_cells)
    w = build_weights(0.5, grid)
    f = np.cos(grid.nodes)
    for _ in range(repetitions):
        caputo_derivative(f, w)


def test_flux_complexity():
    """
    Test that applying the flux costs at most quadratically in the
    number of cells.
    """
    n_list = [128, 256, 512, 1024]
    for n in n_list:
        repeated_flux(n, 1)  # Weight tables

    t_list = []
    for n in n_list:
        number = max(1, int(2e6 / n**2))
        t_tot = timeit.timeit(lambda: repeated_flux(n), number=number, timer=time.process_time)
        t_list.append(t_tot / number)
    n0 = n_list[0]
    t0 = t_list[0]
    for n, t in zip(n_list[1:], t_list[1:]):
        # Dense table-vector products: slope 2 on a log-log plot, with margin
        assert log10(t / t0) < 2.3 * log10(n / n0)


@pytest.mark.parametrize("n_cells", (64, 256, 1024))
@pytest.mark.benchmark
def test_build_weights_speed(n_cells):
    # Uncached construction:
    w = fracops._cached_weights.__wrapped__(0.5, n_cells)
    assert w.flux_weights.shape == (n_cells + 2, n_cells)


@pytest.fixture(scope="module")
def stepping_setup():
    grid = Grid(256)
    w = build_weights(0.5, grid)
    split = build_split(0.5, grid, w)
    v = np.zeros(257)
    return v, grid, w, split


@pytest.mark.parametrize("scheme", ("imex", "implicit"))
@pytest.mark.benchmark
def test_step_speed(stepping_setup, scheme):
    v, grid, w, split = stepping_setup
    step(v, 0.5, 0.1, 1.0, 0.0, 1e-4, grid, w, split, scheme)


@pytest.mark.benchmark
def test_eta_solve_speed():
    eta_solve(0.5, 1.0)
