"""
Qualitative properties of the Stefan problem as pass/fail checks on
solver runs.

Each check returns a PropertyReport. A report is "pass" exactly when its
worst violation is within its tolerance; checks whose hypotheses do not
hold for the run are "not-applicable". Checks only read the run.
"""

from dataclasses import asdict, dataclass, field
import json
import logging

import numpy
from scipy.special import gamma

logger = logging.getLogger(__name__)

__all__ = [
    "PropertyReport",
    "check_positivity",
    "check_envelope",
    "check_front_ordering",
    "check_boundary_exponent",
    "boundary_exponent_fit",
    "check_velocity_bounds",
    "check_l2_growth",
    "l2_monitor",
    "run_checks",
    "DEFAULT_TOLERANCES",
]

PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not-applicable"

DEFAULT_TOLERANCES = {
    "positivity": 1e-8,
    "envelope": 1e-6,
    "exponent": 0.02,
    "velocity": 1e-8,
    "ordering": 1e-6,
}


@dataclass(frozen=True)
class PropertyReport:
    """
    Outcome of one property check.

    location -- {"x": ..., "t": ...} of the worst violation (keys absent
    when meaningless).
    """

    name: str
    status: str
    worst_violation: float
    tolerance: float
    location: dict = field(default_factory=dict)
    detail: str = ""

    def __post_init__(self):
        if self.status not in (PASS, FAIL, NOT_APPLICABLE):
            raise ValueError("unknown report status %r" % (self.status,))
        if self.status != NOT_APPLICABLE and (
            (self.worst_violation <= self.tolerance) != (self.status == PASS)
        ):
            raise ValueError("report status does not match its violation")

    @classmethod
    def judge(cls, name, worst_violation, tolerance, location=None, detail=""):
        worst_violation = float(worst_violation)
        return cls(
            name,
            PASS if worst_violation <= tolerance else FAIL,
            worst_violation,
            float(tolerance),
            dict(location or {}),
            detail,
        )

    @classmethod
    def not_applicable(cls, name, tolerance, detail):
        return cls(name, NOT_APPLICABLE, 0.0, float(tolerance), {}, detail)

    @property
    def passed(self):
        return self.status == PASS

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _location(run, frame, node=None):
    location = {"t": float(run.solution.times[frame])}
    if node is not None:
        location["x"] = float(run.solution.positions()[frame, node])
    return location


def check_positivity(run, tol=DEFAULT_TOLERANCES["positivity"]):
    """
    u >= -tol at every frame and node.
    """
    u = run.solution.u_frames()
    frame, node = numpy.unravel_index(numpy.argmin(u), u.shape)
    return PropertyReport.judge(
        "positivity", max(-u[frame, node], 0.0), tol, _location(run, frame, node)
    )


def check_envelope(run, tol=DEFAULT_TOLERANCES["envelope"]):
    """
    u <= M/Gamma(1+alpha) (s^alpha - x^alpha) + tol at every frame and
    node, when u0 lies below the same bound at t = 0.
    """
    problem = run.problem
    grid = run.solution.grid
    if not numpy.isfinite(run.M) or not problem.envelope_admissible(grid, run.M, 1e-12):
        return PropertyReport.not_applicable(
            "envelope", tol, "initial profile above the envelope or unbounded flux"
        )
    positions = run.solution.positions()
    s = run.solution.front.s_values[:, None]
    bound = run.M / gamma(1 + problem.alpha) * (s**problem.alpha - positions**problem.alpha)
    excess = run.solution.u_frames() - bound
    frame, node = numpy.unravel_index(numpy.argmax(excess), excess.shape)
    return PropertyReport.judge(
        "envelope", max(excess[frame, node], 0.0), tol, _location(run, frame, node)
    )


def check_front_ordering(runs, tol=DEFAULT_TOLERANCES["ordering"]):
    """
    Fronts of runs with nondecreasing data are nondecreasing, at the
    frame instants shared by all runs.
    """
    if len(runs) < 2:
        raise ValueError("front ordering needs at least two runs")
    shared = numpy.round(runs[0].solution.times, 12)
    for run in runs[1:]:
        shared = numpy.intersect1d(shared, numpy.round(run.solution.times, 12))
    if not len(shared):
        raise ValueError("the runs share no output instant")

    fronts = []
    for run in runs:
        times = numpy.round(run.solution.times, 12)
        index = numpy.searchsorted(times, shared)
        fronts.append(run.solution.front.s_values[index])
    gaps = numpy.array(fronts[:-1]) - numpy.array(fronts[1:])
    pair, instant = numpy.unravel_index(numpy.argmax(gaps), gaps.shape)
    return PropertyReport.judge(
        "front-ordering",
        max(gaps[pair, instant], 0.0),
        tol,
        {"t": float(shared[instant])},
        "runs %d and %d" % (pair, pair + 1),
    )


def _window(run, frame, window_frac):
    nodes = run.solution.grid.nodes
    selected = numpy.flatnonzero((nodes > 0) & (nodes <= window_frac))
    if len(selected) < 4:
        raise ValueError(
            "degenerate fit: %d nodes in the window, at least 4 are needed"
            % len(selected)
        )
    x = run.solution.positions()[frame, selected]
    u = run.solution.u_frames()[frame]
    return x, u[selected] - u[0]


def boundary_exponent_fit(run, frame, window_frac=0.05):
    """
    Two-parameter fit u(0) - u(x) = C x^gamma over the first window_frac
    of the domain. Returns (C, gamma).
    """
    x, du = _window(run, frame, window_frac)
    if numpy.any(du >= 0):
        raise ValueError("u is not decreasing near x = 0")
    slope, intercept = numpy.polyfit(numpy.log(x), numpy.log(-du), 1)
    return float(numpy.exp(intercept)), float(slope)


def check_boundary_exponent(run, window_frac=0.05, tol=DEFAULT_TOLERANCES["exponent"]):
    """
    Least-squares fit u(x) - u(0) = -c x^alpha/Gamma(1+alpha) near x = 0
    at every frame after the initial one; |c - h|/h <= tol.
    """
    alpha = run.problem.alpha
    fluxes = run.solution.fluxes
    frames = [k for k in range(1, len(fluxes)) if fluxes[k] > 0]
    if not frames:
        return PropertyReport.not_applicable(
            "boundary-exponent", tol, "the boundary flux vanishes"
        )
    worst, where = -1.0, frames[0]
    for k in frames:
        x, du = _window(run, k, window_frac)
        basis = x**alpha / gamma(1 + alpha)
        c = -float(du @ basis) / float(basis @ basis)
        error = abs(c - fluxes[k]) / fluxes[k]
        if error > worst:
            worst, where = error, k
    return PropertyReport.judge(
        "boundary-exponent", worst, tol, _location(run, where)
    )


def check_velocity_bounds(run, tol=DEFAULT_TOLERANCES["velocity"]):
    """
    Front nondecreasing with velocities in [0, M], and no unclamped
    velocity above M + tol.
    """
    front = run.front
    worst = max(
        front.velocity_violation(run.M),
        front.monotonicity_violation(),
        run.overshoot,
    )
    return PropertyReport.judge(
        "velocity-bounds",
        worst,
        tol,
        detail="largest unclamped violation %.3g" % run.clamp_violation,
    )


def l2_monitor(run):
    """
    ||u(., t)||_L2(0, s(t)) at every frame.
    """
    solution = run.solution
    return numpy.sqrt(
        solution.front.s_values * solution.grid.trapezoid(solution.u_frames() ** 2)
    )


def check_l2_growth(coarse, fine, limit=10.0):
    """
    Ratio of the largest L2 norms of a refined run and its coarse
    counterpart; unbounded growth under refinement is flagged when the
    ratio exceeds limit.
    """
    coarse_max = float(numpy.max(l2_monitor(coarse)))
    fine_max = float(numpy.max(l2_monitor(fine)))
    if coarse_max == 0:
        factor = 1.0 if fine_max == 0 else numpy.inf
    else:
        factor = fine_max / coarse_max
    return PropertyReport.judge("l2-growth", factor, limit)


def run_checks(run, tolerances=None, window_frac=0.05):
    """
    All single-run checks with the given tolerance overrides.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    reports = [
        check_positivity(run, tol["positivity"]),
        check_envelope(run, tol["envelope"]),
        check_velocity_bounds(run, tol["velocity"]),
    ]
    try:
        reports.append(check_boundary_exponent(run, window_frac, tol["exponent"]))
    except ValueError as exc:
        reports.append(
            PropertyReport.not_applicable("boundary-exponent", tol["exponent"], str(exc))
        )
    for report in reports:
        logger.info("%s: %s (worst %.3g)", report.name, report.status, report.worst_violation)
    return reports
