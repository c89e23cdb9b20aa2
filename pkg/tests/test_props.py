from dataclasses import replace

import numpy as np
import pytest

from fracstefan import (
    AnalyticBenchmark,
    FluxSpec,
    Grid,
    InitialProfile,
    PropertyReport,
    StefanProblem,
    build_weights,
    solve_fbp,
)
from fracstefan.props import (
    DEFAULT_TOLERANCES,
    boundary_exponent_fit,
    check_boundary_exponent,
    check_envelope,
    check_front_ordering,
    check_l2_growth,
    check_positivity,
    check_velocity_bounds,
    l2_monitor,
    run_checks,
)

from helpers import constant_flux_run


def test_property_report():
    report = PropertyReport.judge("positivity", 1e-9, 1e-8, {"x": 0.5, "t": 0.25})
    assert report.passed and report.status == "pass"
    assert PropertyReport.from_json(report.to_json()) == report

    failed = PropertyReport.judge("positivity", 1e-7, 1e-8)
    assert failed.status == "fail" and not failed.passed
    assert failed.location == {}

    skipped = PropertyReport.not_applicable("envelope", 1e-6, "unbounded flux")
    assert skipped.status == "not-applicable" and not skipped.passed
    assert PropertyReport.from_dict(skipped.to_dict()) == skipped

    with pytest.raises(ValueError, match="does not match"):
        PropertyReport("positivity", "pass", 1.0, 1e-8)
    with pytest.raises(ValueError, match="status"):
        PropertyReport("positivity", "maybe", 0.0, 1e-8)


@pytest.fixture(scope="module")
def fine_run():
    """
    Constant flux, M = 1, b = 0.5, u0 = 0 and N = 256.
    """
    return constant_flux_run(n_cells=256, dt=1e-2, horizon=0.5)


def test_positivity_envelope_velocity(fine_run):
    positivity = check_positivity(fine_run)
    assert positivity.passed
    assert set(positivity.location) == {"x", "t"}

    assert check_envelope(fine_run).passed
    velocity = check_velocity_bounds(fine_run)
    assert velocity.passed
    assert velocity.tolerance == DEFAULT_TOLERANCES["velocity"]


def test_run_checks(fine_run):
    reports = run_checks(fine_run)
    names = [report.name for report in reports]
    assert names == ["positivity", "envelope", "velocity-bounds", "boundary-exponent"]
    assert all(report.status != "fail" for report in reports[:3])

    # A tolerance override changes the verdict, not the violation:
    strict = run_checks(fine_run, {"positivity": -1.0})
    assert strict[0].status == "fail"
    assert strict[0].worst_violation == reports[0].worst_violation


def test_checks_not_applicable():
    problem = StefanProblem(
        0.5, FluxSpec.constant(0.0), 0.5, InitialProfile.table([0.0, 0.5], [0.2, 0.0]), horizon=0.2
    )
    grid = Grid(32)
    run = solve_fbp(problem, grid, build_weights(0.5, grid), 1e-2, output_every=5)

    assert check_boundary_exponent(run).status == "not-applicable"
    # u0 > 0 lies above the envelope of a zero flux:
    assert check_envelope(run).status == "not-applicable"
    assert check_positivity(run).passed


def test_front_ordering():
    low = constant_flux_run(h0=0.5)
    high = constant_flux_run(h0=1.0)
    assert check_front_ordering([low, high]).passed

    reversed_report = check_front_ordering([high, low])
    assert reversed_report.status == "fail"
    assert reversed_report.location["t"] > 0
    assert reversed_report.detail == "runs 0 and 1"

    with pytest.raises(ValueError, match="two runs"):
        check_front_ordering([low])

    # Nested initial domains:
    small = constant_flux_run(b=1 / 16)
    large = constant_flux_run(b=1 / 8)
    report = check_front_ordering([small, large])
    assert report.passed
    assert report.worst_violation <= DEFAULT_TOLERANCES["ordering"]


def test_front_ordering_shared_instants():
    # Different output cadences still share the instants 0, 0.1, ...
    every_step = constant_flux_run(h0=0.5, output_every=1)
    sparse = constant_flux_run(h0=1.0, output_every=10)
    report = check_front_ordering([every_step, sparse])
    assert report.passed


def _benchmark_run(alpha, n_cells, horizon=0.5, t0=0.1, dt=2e-3):
    bench = AnalyticBenchmark.from_parameters(alpha, 1.0)
    problem = StefanProblem(
        alpha=alpha,
        flux=FluxSpec.similarity(alpha, 1.0),
        b=float(bench.front(t0)),
        u0=InitialProfile.restart(bench, t0),
        horizon=horizon,
        t_start=t0,
    )
    grid = Grid(n_cells)
    return solve_fbp(problem, grid, build_weights(alpha, grid), dt, output_every=25)


def test_boundary_exponent_on_benchmark():
    run = _benchmark_run(0.5, 256)
    report = check_boundary_exponent(run, window_frac=0.05, tol=0.02)
    assert report.passed
    assert "t" in report.location

    with pytest.raises(ValueError, match="degenerate fit"):
        check_boundary_exponent(run, window_frac=0.01)


def test_boundary_exponent_classical_limit():
    """
    Close to alpha = 1 the boundary profile is linear.
    """
    run = _benchmark_run(0.999, 256, horizon=0.3)
    _, exponent = boundary_exponent_fit(run, len(run.solution.times) - 1)
    assert exponent == pytest.approx(1.0, abs=0.02)


def test_l2_growth():
    coarse = constant_flux_run(n_cells=32)
    fine = constant_flux_run(n_cells=64)
    monitor = l2_monitor(fine)
    assert monitor.shape == fine.solution.times.shape
    assert monitor[0] == 0.0 and np.all(monitor[1:] > 0)

    report = check_l2_growth(coarse, fine)
    assert report.passed
    assert report.worst_violation == pytest.approx(1.0, rel=0.2)
    assert check_l2_growth(coarse, fine, limit=0.5).status == "fail"


def test_l2_monitor_on_benchmark():
    # Self-similarity: ||u(., t)||^2 = t^(1/(1+alpha)) int_0^eta profile^2
    run = _benchmark_run(0.5, 128)
    bench = AnalyticBenchmark.from_parameters(0.5, 1.0)
    grid = Grid(512)
    squared = bench.eta * grid.trapezoid(bench.profile(bench.eta * grid.nodes) ** 2)
    exact = np.sqrt(run.solution.times**bench.exponent * squared)
    assert np.allclose(l2_monitor(run), exact, rtol=3e-2, atol=0)


def test_positivity_detects_injected_negative_value():
    run = constant_flux_run()
    assert check_positivity(run).passed

    # p = 0.875 lies beyond the cutoff of the singular part, so u = v there
    frames = run.solution.v_frames.copy()
    frames[2, 56] = -0.5
    corrupted = replace(run, solution=replace(run.solution, v_frames=frames))
    report = check_positivity(corrupted)
    assert report.status == "fail"
    assert report.worst_violation == 0.5
    assert report.location == {
        "t": run.solution.times[2],
        "x": run.solution.front.s_values[2] * 0.875,
    }
