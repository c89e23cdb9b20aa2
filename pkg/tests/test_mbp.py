import math

import numpy as np
import pytest
from scipy.special import gamma

from fracstefan import (
    AnalyticBenchmark,
    FluxSpec,
    FrontPath,
    Grid,
    InitialProfile,
    StefanProblem,
    analytic_pair,
    build_split,
    build_weights,
    caputo_derivative,
    solve_mbp,
    step,
    transformed_source,
)
from fracstefan.errors import CFLViolation
from fracstefan.mbp import flux_samples, front_flux, initial_regular_part, singular_profile

from helpers import constant_flux_run, max_error

###############################################################################
# Problem data


def test_flux_spec():
    h = FluxSpec.constant(2.0)
    assert h(0.3) == 2.0
    assert h.integral(0.5, 1.5) == pytest.approx(2.0)
    assert h.sup(0, 1) == 2.0
    assert not h.is_zero
    assert FluxSpec.constant(0).is_zero

    h = FluxSpec.power_law(1.0, -0.5)
    assert h.antiderivative(4.0) == pytest.approx(4.0)
    assert h.average(0.0, 1.0) == pytest.approx(2.0)
    assert h.sup(0.0, 1.0) == math.inf
    assert h.sup(1.0, 4.0) == 1.0

    h = FluxSpec.similarity(0.5, 1.0)
    assert h.power == pytest.approx(-1 / 3)
    assert h.describe() == {"kind": "power", "h0": 1.0, "power": h.power}

    for bad in [lambda: FluxSpec.constant(-1), lambda: FluxSpec.power_law(1, -1)]:
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(ValueError):
        FluxSpec("pulse", h0=1)


def test_flux_table():
    h = FluxSpec.table([0.5, 1.0, 2.0], [1.0, 3.0, 0.0])
    assert h(0.0) == 1.0  # Constant beyond the ends
    assert h(0.75) == pytest.approx(2.0)
    assert h(5.0) == 0.0
    assert h.sup(0.0, 3.0) == 3.0

    t = np.linspace(0, 2.5, 250001)
    values = h(t)
    numeric = np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(t))
    assert h.antiderivative(2.5) == pytest.approx(numeric, rel=1e-9)
    assert h.integral(0.7, 1.3) == pytest.approx(
        np.sum(
            [0.5 * (h(a) + h(b)) * (b - a) for a, b in [(0.7, 1.0), (1.0, 1.3)]]
        )
    )

    with pytest.raises(ValueError, match=r"h\(1\) = -2 is negative.*h\(t\) >= 0"):
        FluxSpec.table([0, 1], [1, -2])
    with pytest.raises(ValueError, match="increasing"):
        FluxSpec.table([1, 0], [1, 1])


def test_initial_profile():
    alpha, b, M = 0.5, 0.5, 2.0
    p = np.linspace(0, 1, 11)
    assert np.all(InitialProfile.zero().sample(p, b, alpha, M) == 0)
    assert InitialProfile.envelope(0).is_zero

    envelope = InitialProfile.envelope(0.5).sample(p, b, alpha, M)
    expected = 0.5 * M / gamma(1.5) * (b**0.5 - (p * b) ** 0.5)
    assert np.allclose(envelope, expected, rtol=1e-14)

    table = InitialProfile.table([0, 0.25, 0.5, 1.0], [1.0, 0.5, 0.0, 0.0])
    samples = table.sample(p, b, alpha, M)
    assert samples[0] == pytest.approx(1.0)
    assert samples[5] == pytest.approx(0.5)
    assert np.all(np.diff(samples) <= 1e-15)  # Monotone interpolation

    with pytest.raises(ValueError, match="cover"):
        table.sample(p, 2.0, alpha, M)
    with pytest.raises(ValueError, match="u0 >= 0"):
        InitialProfile.table([0, 1], [1, -1])
    with pytest.raises(ValueError):
        InitialProfile.envelope(-1)


def test_stefan_problem():
    problem = StefanProblem(alpha=0.5, flux=FluxSpec.constant(1.5), b=0.25)
    assert problem.M == 1.5
    assert problem.with_b(0.5).b == 0.5
    assert problem.describe()["u0_spec"] == {"kind": "zero"}

    grid = Grid(16)
    assert problem.envelope_admissible(grid)
    assert problem.envelope(1.0, 0.25) == 0.0

    admissible = StefanProblem(0.5, FluxSpec.constant(1), 0.25, InitialProfile.envelope(1.0))
    assert admissible.envelope_admissible(grid, tol=1e-12)
    above = StefanProblem(0.5, FluxSpec.constant(1), 0.25, InitialProfile.envelope(2.0))
    assert not above.envelope_admissible(grid)

    not_vanishing = StefanProblem(
        0.5, FluxSpec.constant(1), 0.25, InitialProfile.table([0, 1], [1, 1])
    )
    with pytest.raises(ValueError, match=r"u0\(b\) = 0"):
        not_vanishing.initial_samples(grid)

    with pytest.raises(ValueError, match=r"alpha must lie in \(0,1\)"):
        StefanProblem(1.2, FluxSpec.constant(1), 0.25)
    with pytest.raises(ValueError):
        StefanProblem(0.5, FluxSpec.constant(1), -0.25)
    with pytest.raises(ValueError):
        StefanProblem(0.5, FluxSpec.constant(1), 0.25, horizon=0.0)


def test_front_path():
    times = np.linspace(0, 1, 5)
    front = FrontPath.stationary(0.5, times)
    assert front.velocity_violation(1.0) == 0.0
    assert front[::2].times.tolist() == [0.0, 0.5, 1.0]

    front = FrontPath(times, 0.5 + times, np.array([0, 1, 2, 0.5, -0.25]))
    assert front.velocity_violation(1.0) == 1.0
    assert front.monotonicity_violation() == 0.0

    with pytest.raises(ValueError, match="increasing"):
        FrontPath(times[::-1], times, times)
    with pytest.raises(ValueError):
        FrontPath(times, times[:-1], times)


###############################################################################
# Singular split


@pytest.fixture(scope="module")
def split():
    grid = Grid(64)
    return build_split(0.5, grid, build_weights(0.5, grid))


def test_split_profile(split):
    nodes = split.grid.nodes
    below = nodes <= 0.5
    assert np.allclose(split.phi[below], nodes[below] ** 0.5 / gamma(1.5), rtol=1e-15)
    assert np.all(split.phi[nodes >= 0.75] == 0)
    assert np.all(split.div_phi[below] == 0)
    faces = split.grid.faces
    assert np.all(split.d_alpha_phi[faces <= 0.5] == 1.0)
    # Non-local: D^alpha phi does not vanish where phi does
    assert abs(split.d_alpha_phi_end) > 1e-3
    assert np.allclose(singular_profile(0.5, nodes), split.phi, rtol=0, atol=0)


def test_split_against_grid_tables():
    grid = Grid(256)
    w = build_weights(0.5, grid)
    split = build_split(0.5, grid, w)
    faces = grid.faces
    assert max_error(caputo_derivative(split.phi, w), split.d_alpha_phi, where=faces >= 0.1) <= 0.05


def test_split_backends_agree(split):
    other = build_split(0.5, split.grid, quad_tol=1e-10, backend="scipy")
    assert np.allclose(other.d_alpha_phi, split.d_alpha_phi, rtol=0, atol=1e-8)
    assert np.allclose(other.div_phi, split.div_phi, rtol=0, atol=1e-8)
    index = int(np.argmin(np.abs(split.grid.nodes - 0.9)))
    assert abs(split.div_phi[index]) > 1e-3


def test_split_errors():
    grid = Grid(16)
    with pytest.raises(ValueError, match="blend"):
        build_split(0.5, grid, blend=(0.8, 0.6))
    with pytest.raises(ValueError, match="do not match"):
        build_split(0.5, grid, build_weights(0.3, grid))


def test_transformed_source(split):
    nodes = split.grid.nodes
    g = transformed_source(split, 1.0, 0.0, 0.5, 0.0, split.grid)
    assert g[-1] == 0
    assert np.all(g[nodes <= 0.5] == 0)

    # The amplitude rate multiplies phi:
    g = transformed_source(split, 0.0, 2.0, 1.0, 0.0, split.grid)
    assert np.allclose(g[:-1], 2.0 * split.phi[:-1])

    with pytest.raises(ValueError):
        transformed_source(split, 1.0, 0.0, 0.0, 0.0, split.grid)


###############################################################################
# Time stepping


def test_step_checks(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    v = np.zeros(65)
    with pytest.raises(ValueError, match="vanish"):
        step(np.ones(65), 0.5, 0.0, 1.0, 0.0, 1e-3, grid, w, split)
    with pytest.raises(ValueError, match="dt"):
        step(v, 0.5, 0.0, 1.0, 0.0, 0.0, grid, w, split)
    with pytest.raises(ValueError, match="velocity"):
        step(v, 0.5, -1.0, 1.0, 0.0, 1e-3, grid, w, split)
    with pytest.raises(ValueError, match="scheme"):
        step(v, 0.5, 0.0, 1.0, 0.0, 1e-3, grid, w, split, scheme="explicit")

    # dt above 0.5 spacing s / s' = 0.5 * 0.5 / 64 / 1:
    with pytest.raises(CFLViolation):
        step(v, 0.5, 1.0, 1.0, 0.0, 1e-2, grid, w, split, scheme="imex")
    # The implicit scheme has no such bound:
    step(v, 0.5, 1.0, 1.0, 0.0, 1e-2, grid, w, split, scheme="implicit")


def test_schemes_agree(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    v0 = (1 - grid.nodes) ** 2
    v0[-1] = 0.0
    results = {}
    for scheme in ("imex", "implicit"):
        v = v0.copy()
        for _ in range(20):
            v = step(v, 0.5, 0.2, 1.0, 0.0, 1e-4, grid, w, split, scheme=scheme)
        results[scheme] = v
    assert max_error(results["imex"], results["implicit"]) <= 1e-3
    assert results["imex"][-1] == results["implicit"][-1] == 0


@pytest.mark.parametrize("scheme", ["imex", "implicit"])
def test_pure_diffusion_matches_heat_equation(scheme):
    """
    Fixed front s = 1, no flux, alpha close to 1: the decay of v per step
    is that of implicit Euler for v_t = v_pp on the same control volumes.
    """
    alpha, n_cells, dt = 0.999, 64, 1e-2
    grid = Grid(n_cells)
    w = build_weights(alpha, grid)
    split = build_split(alpha, grid, w)

    # v_p(0) = 0 and v(1) = 0:
    laplacian = np.zeros((n_cells + 1, n_cells + 1))
    rows = np.arange(1, n_cells)
    laplacian[rows, rows - 1] = laplacian[rows, rows + 1] = grid.spacing**-2
    laplacian[rows, rows] = -2 * grid.spacing**-2
    laplacian[0, :2] = [-2 * grid.spacing**-2, 2 * grid.spacing**-2]
    heat = np.eye(n_cells + 1) - dt * laplacian

    v = np.cos(0.5 * np.pi * grid.nodes)
    v[-1] = 0.0
    classical = v.copy()
    for _ in range(20):
        new = step(v, 1.0, 0.0, 0.0, 0.0, dt, grid, w, split, scheme=scheme)
        new_classical = np.linalg.solve(heat, classical)
        decay = 1 - np.linalg.norm(new) / np.linalg.norm(v)
        expected = 1 - np.linalg.norm(new_classical) / np.linalg.norm(classical)
        assert decay == pytest.approx(expected, rel=0.05)
        v, classical = new, new_classical


def test_flux_samples():
    flux = FluxSpec.power_law(1.0, -0.5)
    times = np.linspace(0, 1, 11)
    averages, rates = flux_samples(flux, times)
    assert averages[0] == pytest.approx(2 * 0.1**0.5 / 0.1)
    assert np.all(np.diff(averages) < 0)
    assert np.all(np.isfinite(averages))
    assert rates[0] == pytest.approx((averages[1] - averages[0]) / 0.1)


def _problem(**kwargs):
    data = dict(alpha=0.5, flux=FluxSpec.constant(1.0), b=0.5, horizon=0.2)
    data.update(kwargs)
    return StefanProblem(**data)


def test_solve_mbp_stationary_front(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    problem = _problem()
    times = np.linspace(0, 0.2, 41)
    solution = solve_mbp(problem, FrontPath.stationary(0.5, times), grid, w, output_every=10, split=split)

    assert solution.times.tolist() == pytest.approx([0, 0.05, 0.1, 0.15, 0.2])
    u = solution.u_frames()
    assert u.shape == (5, 65)
    assert np.all(u[:, -1] == 0)
    assert np.min(u) >= -1e-8
    assert np.all(np.diff(u[:, 0]) > 0)  # Heating at x = 0
    assert solution.u_eval(0.75, 4) == 0.0
    assert solution.u_eval(0.0, 4) == pytest.approx(u[4, 0])
    assert solution.masses()[0] == 0.0


def test_solve_mbp_zero_data(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    problem = _problem(flux=FluxSpec.constant(0))
    times = np.linspace(0, 0.2, 11)
    solution = solve_mbp(problem, FrontPath.stationary(0.5, times), grid, w, split=split)
    assert np.all(solution.u_frames() == 0)


def test_solve_mbp_split_invariance():
    """
    u does not depend on where the singular part is cut off.
    """
    grid = Grid(128)
    w = build_weights(0.5, grid)
    problem = _problem()
    times = np.linspace(0, 0.2, 41)
    front = FrontPath.from_function(times, lambda t: 0.5 + 0.5 * t, lambda t: 0.5 + 0 * t)
    finals = []
    for blend in [(0.5, 0.75), (0.3, 0.6)]:
        split = build_split(0.5, grid, w, blend=blend)
        finals.append(solve_mbp(problem, front, grid, w, split=split).u_frames()[-1])
    assert max_error(finals[0], finals[1]) <= 5e-2 * np.max(np.abs(finals[0]))


def test_solve_mbp_errors(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    times = np.linspace(0, 0.2, 11)
    with pytest.raises(ValueError, match="start"):
        solve_mbp(_problem(), FrontPath.stationary(0.4, times), grid, w, split=split)
    with pytest.raises(ValueError, match="b > 0"):
        solve_mbp(_problem(b=0.0), FrontPath.stationary(0.0, times), grid, w, split=split)


def test_initial_regular_part_and_front_flux(split):
    grid = split.grid
    w = build_weights(0.5, grid)
    problem = _problem()
    v0 = initial_regular_part(problem, grid, split, 1.0)
    assert v0[-1] == 0
    # u0 = 0, so the front sees only the flux mismatch of the split
    value = front_flux(v0, 0.5, 1.0, w, split)
    assert np.isfinite(value)
    assert abs(value) <= 0.1


def test_front_flux_sign(split):
    """
    With nonnegative data and a positive flux, D^alpha u < 0 at the front
    once the heat has spread.
    """
    grid = split.grid
    w = build_weights(0.5, grid)
    problem = _problem(u0=InitialProfile.envelope(0.5))
    times = np.linspace(0, 0.2, 41)
    solution = solve_mbp(problem, FrontPath.stationary(0.5, times), grid, w, output_every=10, split=split)
    for v, h in zip(solution.v_frames[1:], solution.fluxes[1:]):
        assert front_flux(v, 0.5, h, w, split) < 0

    # Free front: the velocity is minus the front flux
    run = constant_flux_run()
    assert np.all(run.front.s_dots[1:] >= 0.15)


@pytest.mark.parametrize("moving", [False, True], ids=["stationary", "moving"])
def test_comparison_bound(moving):
    """
    With h = M and u0 below the envelope, u stays below
    M/Gamma(1+alpha) (s^alpha - x^alpha).
    """
    grid = Grid(64)
    w = build_weights(0.5, grid)
    problem = _problem(u0=InitialProfile.envelope(0.5), horizon=0.3)
    times = np.linspace(0, 0.3, 61)
    if moving:
        front = FrontPath.from_function(times, lambda t: 0.5 + 0.5 * t, lambda t: 0.5 + 0 * t)
    else:
        front = FrontPath.stationary(0.5, times)
    solution = solve_mbp(problem, front, grid, w, output_every=10)
    bound = problem.envelope(solution.positions(), solution.front.s_values[:, None])
    assert np.all(solution.u_frames() <= bound + 1e-2)


def test_analytic_restart():
    """
    Prescribed self-similar front from t0 = 0.1: u follows the exact
    solution.
    """
    bench = AnalyticBenchmark.from_parameters(0.5, 1.0)
    problem = StefanProblem(
        alpha=0.5,
        flux=FluxSpec.similarity(0.5, 1.0),
        b=float(bench.front(0.1)),
        u0=InitialProfile.restart(bench, 0.1),
        horizon=1.0,
        t_start=0.1,
    )
    errors = []
    for n_cells, n_steps in [(64, 225), (128, 450)]:
        grid = Grid(n_cells)
        times = np.linspace(0.1, 1.0, n_steps + 1)
        front = FrontPath.from_function(
            times, bench.front, lambda t: bench.exponent * bench.front(t) / t
        )
        solution = solve_mbp(problem, front, grid, build_weights(0.5, grid), output_every=n_steps)
        u = solution.u_frames()[-1]
        exact_u, s = analytic_pair(bench, solution.positions()[-1], 1.0)
        assert s == pytest.approx(solution.front.s_values[-1], rel=1e-12)
        errors.append(np.max(np.abs(u - exact_u)) / np.max(exact_u))
    assert errors[1] < errors[0]
    assert errors[1] <= 5e-2
