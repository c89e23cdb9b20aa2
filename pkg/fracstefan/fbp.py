"""
Free-boundary coupling.

The front moves with the fractional Stefan condition

    s'(t) = -D^alpha_x u(s(t), t),

clamped to the admissible interval [0, M] (M: largest step average of
the boundary flux). Two outer procedures are provided: direct time
marching (solve_fbp) and the fixed-point iteration

    (P s)(t) = b - int_0^t D^alpha_x u(s(tau), tau) dtau

(fixed_point_P). The zero initial domain is reached through the
decreasing sequence of solutions with b = 1/m (solve_b_zero).

Every run is checked against the integral form of the Stefan condition

    s(t) = b + int h + int_0^b u0 - int_0^s(t) u(x, t) dx

through stefan_residual().
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
import warnings

import numpy
from scipy.optimize import brentq

from .errors import (
    ClampWarning,
    FixedPointNonConvergence,
    FrontStagnationWarning,
    OrderingViolation,
)
from .mbp import (
    FrontPath,
    SolutionField,
    _frame_indices,
    build_split,
    flux_samples,
    front_flux,
    initial_regular_part,
    step,
)

logger = logging.getLogger(__name__)

__all__ = [
    "FbpRun",
    "BZeroSweep",
    "MODES",
    "time_grid",
    "solve_fbp",
    "fixed_point_P",
    "solve_b_zero",
    "stefan_residual",
    "richardson",
]

MODES = ("time-marching", "fixed-point")

# Number of consecutive motionless steps (with positive flux) that
# raises the stagnation alarm:
STAGNATION_WINDOW = 50


@dataclass(frozen=True)
class FbpRun:
    """
    Result of a free-boundary solve.

    front -- FrontPath at every step instant.
    solution -- frames of the regular part (their front is front sampled
    at the frame instants).
    residuals -- integral-condition residual at the frame instants.
    clamp_violation -- largest distance of an unclamped velocity to
    [0, M].
    overshoot -- largest excess of an unclamped velocity over M.
    history -- sup-norm differences between fixed-point iterates.
    """

    problem: object
    solution: SolutionField
    front: FrontPath
    mode: str
    M: float
    dt: float
    scheme: str
    residuals: numpy.ndarray = None
    clamp_violation: float = 0.0
    overshoot: float = 0.0
    iterations: int = 1
    history: tuple = ()

    @property
    def s_final(self):
        return float(self.front.s_values[-1])

    @property
    def max_residual(self):
        return float(numpy.max(numpy.abs(self.residuals)))

    def summary(self):
        """
        JSON-serializable summary of the run.
        """
        description = self.problem.describe()
        return {
            "alpha": description["alpha"],
            "b": description["b"],
            "h_spec": description["h_spec"],
            "u0_spec": description["u0_spec"],
            "N": self.solution.grid.n_cells,
            "dt": self.dt,
            "scheme": self.scheme,
            "mode": self.mode,
            "s_final": self.s_final,
            "max_residual": self.max_residual,
            "clamp_violation": self.clamp_violation,
            "overshoot": self.overshoot,
            "iterations": self.iterations,
        }


def time_grid(problem, dt):
    """
    Uniform step instants from t_start to the horizon, with a step as
    close as possible to dt.
    """
    if not dt > 0:
        raise ValueError("dt must be positive, got %r" % (dt,))
    span = problem.horizon - problem.t_start
    n_steps = max(1, int(round(span / dt)))
    if abs(n_steps * dt - span) > 1e-9 * span:
        logger.info("dt adjusted from %g to %g to reach the horizon", dt, span / n_steps)
    return numpy.linspace(problem.t_start, problem.horizon, n_steps + 1)


class _March:
    """
    Time loop shared by the free and prescribed front procedures.
    """

    def __init__(self, problem, grid, w, split, times, scheme):
        self.problem = problem
        self.grid = grid
        self.w = w
        self.split = build_split(problem.alpha, grid, w) if split is None else split
        self.times = times
        self.scheme = scheme
        self.averages, self.rates = flux_samples(problem.flux, times)
        self.M = float(numpy.max(self.averages))

    def run(self, frames, prescribed=None, clamp_tol=1e-8):
        """
        March over all instants.

        prescribed -- FrontPath to follow, or None for the free front.

        Returns (s values, velocities used, raw velocities, v frames).
        """
        times = self.times
        n_instants = len(times)
        s_values = numpy.empty(n_instants)
        s_dots = numpy.empty(n_instants)
        raw = numpy.empty(n_instants)
        wanted = set(frames.tolist())
        v_frames = []

        s = self.problem.b
        v = initial_regular_part(self.problem, self.grid, self.split, self.averages[0], self.M)
        stagnant = 0
        for n in range(n_instants):
            if prescribed is not None:
                s = prescribed.s_values[n]
            h = self.averages[n]
            raw[n] = -front_flux(v, s, h, self.w, self.split)
            if prescribed is None:
                s_dot = min(max(raw[n], 0.0), self.M)
                if raw[n] - s_dot > clamp_tol or s_dot - raw[n] > clamp_tol:
                    logger.debug(
                        "velocity clamped at t=%g: %.6g -> %.6g", times[n], raw[n], s_dot
                    )
                if s_dot == 0 and h > 0:
                    stagnant += 1
                    if stagnant == STAGNATION_WINDOW:
                        msg = "front motionless for %d steps at t=%g although h > 0" % (
                            STAGNATION_WINDOW,
                            times[n],
                        )
                        logger.warning(msg)
                        warnings.warn(msg, FrontStagnationWarning, stacklevel=3)
                else:
                    stagnant = 0
            else:
                s_dot = prescribed.s_dots[n]
            s_values[n] = s
            s_dots[n] = s_dot
            if n in wanted:
                v_frames.append(v.copy())
            if n == n_instants - 1:
                break
            dt = times[n + 1] - times[n]
            v = step(v, s, s_dot, h, self.rates[n], dt, self.grid, self.w, self.split, self.scheme)
            if prescribed is None:
                s = s + dt * s_dot

        return s_values, s_dots, raw, numpy.array(v_frames)

    def solution(self, frames, front, v_frames):
        return SolutionField(
            times=self.times[frames],
            v_frames=v_frames,
            front=front[frames],
            fluxes=self.averages[frames],
            alpha=self.problem.alpha,
            grid=self.grid,
            phi=self.split.phi,
        )


def _velocity_violation(raw, M):
    return float(numpy.max(numpy.maximum(-raw, raw - M).clip(0.0)))


def solve_fbp(
    problem, grid, w, dt, scheme="implicit", output_every=1, split=None, clamp_tol=1e-8
):
    """
    Solve the free-boundary problem by time marching.

    At each instant t_n the front velocity is
    s'_n = clamp(-D^alpha_x u(s_n, t_n), 0, M), the front moves to
    s_n + dt s'_n, and the regular part is advanced with (s_n, s'_n).

    A FrontStagnationWarning is emitted when the front does not move for
    STAGNATION_WINDOW consecutive steps while h > 0; a ClampWarning when
    an unclamped velocity leaves [0, M] by more than clamp_tol.
    """
    if not problem.b > 0:
        raise ValueError("solve_fbp needs b > 0; b = 0 is handled by solve_b_zero")
    times = time_grid(problem, dt)
    march = _March(problem, grid, w, split, times, scheme)
    frames = _frame_indices(len(times), output_every)
    s_values, s_dots, raw, v_frames = march.run(frames, clamp_tol=clamp_tol)

    violation = _velocity_violation(raw, march.M)
    if violation > clamp_tol:
        warnings.warn(
            "front velocity clamped into [0, %g]; largest violation %.3g"
            % (march.M, violation),
            ClampWarning,
            stacklevel=2,
        )
    front = FrontPath(times, s_values, s_dots)
    run = FbpRun(
        problem=problem,
        solution=march.solution(frames, front, v_frames),
        front=front,
        mode="time-marching",
        M=march.M,
        dt=float(times[1] - times[0]),
        scheme=scheme,
        clamp_violation=violation,
        overshoot=float(max(numpy.max(raw) - march.M, 0.0)),
    )
    run = replace(run, residuals=stefan_residual(run))
    logger.info(
        "Free-boundary solve: s(T)=%.12g, max residual %.3g", run.s_final, run.max_residual
    )
    return run


def _cumulative_trapezoid(values, times):
    increments = 0.5 * (values[1:] + values[:-1]) * numpy.diff(times)
    return numpy.concatenate(([0.0], numpy.cumsum(increments)))


def fixed_point_P(
    problem,
    s_init,
    max_iters,
    tol,
    grid,
    w,
    scheme="implicit",
    output_every=1,
    split=None,
):
    """
    Iterate s <- P s from the admissible front s_init.

    Each application solves the moving-boundary problem along s,
    projects the velocities -D^alpha_x u(s, t) onto [0, M] and
    integrates them in time (trapezoidal rule). The iteration stops when
    two iterates differ by at most tol in sup norm.

    FixedPointNonConvergence is raised after max_iters iterations; it
    carries the history of the differences.
    """
    if not problem.b > 0:
        raise ValueError("fixed_point_P needs b > 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1, got %r" % (max_iters,))
    times = s_init.times
    march = _March(problem, grid, w, split, times, scheme)
    M = march.M
    if (
        abs(s_init.s_values[0] - problem.b) > 1e-12 * max(1.0, problem.b)
        or abs(times[0] - problem.t_start) > 1e-12
        or s_init.velocity_violation(M) > 1e-12
    ):
        raise ValueError(
            "s_init must start at (t_start, b) with velocities in [0, %g]" % M
        )
    frames = _frame_indices(len(times), output_every)

    current = s_init
    history = []
    violation = 0.0
    for iteration in range(1, max_iters + 1):
        _, _, raw, _ = march.run(frames, prescribed=current)
        violation = _velocity_violation(raw, M)
        projected = numpy.clip(raw, 0.0, M)
        new = FrontPath(times, problem.b + _cumulative_trapezoid(projected, times), projected)
        difference = float(numpy.max(numpy.abs(new.s_values - current.s_values)))
        history.append(difference)
        if len(history) > 1 and history[-2] > 0:
            logger.debug(
                "P iteration %d: difference %.3g, contraction %.3g",
                iteration,
                difference,
                difference / history[-2],
            )
        current = new
        if difference <= tol:
            break
    else:
        raise FixedPointNonConvergence(
            "fixed-point iteration did not reach %g in %d iterations (last %.3g)"
            % (tol, max_iters, history[-1]),
            history,
        )

    _, _, _, v_frames = march.run(frames, prescribed=current)
    run = FbpRun(
        problem=problem,
        solution=march.solution(frames, current, v_frames),
        front=current,
        mode="fixed-point",
        M=M,
        dt=float(times[1] - times[0]),
        scheme=scheme,
        clamp_violation=violation,
        overshoot=float(max(numpy.max(raw) - M, 0.0)),
        iterations=iteration,
        history=tuple(history),
    )
    return replace(run, residuals=stefan_residual(run))


def stefan_residual(run):
    """
    Residual of the integral Stefan condition at the frame instants:

        r(t) = s(t) - b - int h - int_0^b u0 + int_0^s(t) u(x, t) dx

    int h is exact for the step-averaged flux used by the solver, and
    int u is s(t) times the trapezoidal integral of w over [0, 1].
    """
    problem = run.problem
    solution = run.solution
    grid = solution.grid
    s = solution.front.s_values
    injected = problem.flux.integral(problem.t_start, solution.times)
    initial = problem.b * grid.trapezoid(problem.initial_samples(grid, run.M))
    return s - problem.b - injected - initial + solution.masses()


###############################################################################
# b -> 0


@dataclass(frozen=True)
class BZeroSweep:
    """
    Solutions with b = 1/m and the extrapolated front.

    front -- extrapolated front at the frame instants (velocities by
    finite differences).
    error -- |extrapolated - finest member| at the frame instants.
    order -- estimated order of the error in 1/m.
    sensitivity -- change of the extrapolation when the finest member is
    left out (None with fewer than three members).
    """

    m_list: tuple
    runs: tuple
    front: FrontPath
    error: numpy.ndarray
    order: float
    sensitivity: numpy.ndarray = field(default=None)
    ordering_violation: float = 0.0

    def summary(self):
        return {
            "m_list": list(self.m_list),
            "order": self.order,
            "s_final": float(self.front.s_values[-1]),
            "error_final": float(self.error[-1]),
            "ordering_violation": self.ordering_violation,
            "members": [run.summary() for run in self.runs],
        }


def _extrapolate(fronts, eps, p):
    last, previous = fronts[-1], fronts[-2]
    ratio = eps[-1] ** p / (eps[-2] ** p - eps[-1] ** p)
    return last - (previous - last) * ratio


def _estimate_order(fronts, eps):
    """
    Order p of s(eps) = s0 + C eps^p from the last three members.
    """
    d1 = fronts[-3] - fronts[-2]
    d2 = fronts[-2] - fronts[-1]
    scale = numpy.max(numpy.abs(fronts[-1]))
    valid = (numpy.abs(d2) > 1e-12 * max(scale, 1e-300)) & (d1 * d2 > 0)
    if not numpy.any(valid):
        return 1.0
    q = float(numpy.median(d1[valid] / d2[valid]))
    ea, eb, ec = eps[-3], eps[-2], eps[-1]
    if abs(ea / eb - eb / ec) <= 1e-12 * (ea / eb):
        p = math.log(q) / math.log(ea / eb) if q > 0 else 1.0
    else:

        def mismatch(p):
            return (ea**p - eb**p) / (eb**p - ec**p) - q

        try:
            p = brentq(mismatch, 0.05, 10.0)
        except ValueError:
            p = 1.0
    return float(min(max(p, 0.25), 4.0))


def richardson(fronts, m_list):
    """
    Extrapolate fronts computed with b = 1/m to m -> infinity.

    Returns (extrapolated, error estimate, order, sensitivity).
    """
    fronts = numpy.asarray(fronts, dtype=float)
    eps = 1.0 / numpy.asarray(m_list, dtype=float)
    if len(eps) < 2:
        raise ValueError("extrapolation needs at least two members")
    p = _estimate_order(fronts, eps) if len(eps) >= 3 else 1.0
    extrapolated = _extrapolate(fronts, eps, p)
    error = numpy.abs(extrapolated - fronts[-1])
    sensitivity = None
    if len(eps) >= 3:
        sensitivity = numpy.abs(extrapolated - _extrapolate(fronts[:-1], eps[:-1], p))
    return extrapolated, error, p, sensitivity


def _solve_member(args):
    problem, grid, w, dt, scheme, output_every, split = args
    return solve_fbp(problem, grid, w, dt, scheme, output_every, split)


def solve_b_zero(
    problem_template,
    m_list,
    grid,
    w,
    dt,
    scheme="implicit",
    output_every=1,
    split=None,
    workers=1,
    ordering_tol=1e-6,
):
    """
    Approximate the zero initial domain by the solutions with b = 1/m,
    u0 = 0, for m in m_list.

    The fronts must decrease with m (within ordering_tol, otherwise
    OrderingViolation is raised); they are extrapolated in 1/m with an
    empirically estimated order.

    workers -- number of processes used for the members.
    """
    if not problem_template.u0.is_zero:
        raise ValueError("the b -> 0 construction needs u0 = 0")
    m_list = tuple(int(m) for m in m_list)
    if len(m_list) < 2 or any(m < 1 for m in m_list) or list(m_list) != sorted(set(m_list)):
        raise ValueError("m_list must hold at least two increasing positive integers")
    split = build_split(problem_template.alpha, grid, w) if split is None else split

    tasks = [
        (problem_template.with_b(1.0 / m), grid, w, dt, scheme, output_every, split)
        for m in m_list
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = tuple(pool.map(_solve_member, tasks))
    else:
        runs = tuple(_solve_member(task) for task in tasks)

    fronts = numpy.array([run.solution.front.s_values for run in runs])
    violation = float(numpy.max(numpy.diff(fronts, axis=0), initial=0.0))
    if violation > ordering_tol:
        raise OrderingViolation(
            "fronts do not decrease with m: violation %.3g > %.3g"
            % (violation, ordering_tol)
        )

    extrapolated, error, order, sensitivity = richardson(fronts, m_list)
    times = runs[0].solution.times
    front = FrontPath(times, extrapolated, numpy.gradient(extrapolated, times))
    logger.info("b -> 0 sweep over m=%s: order %.3g", m_list, order)
    return BZeroSweep(
        m_list=m_list,
        runs=runs,
        front=front,
        error=error,
        order=order,
        sensitivity=sensitivity,
        ordering_violation=max(violation, 0.0),
    )
