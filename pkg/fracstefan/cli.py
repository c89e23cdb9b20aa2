"""
Command-line interface.

    fracstefan [-v] [--config FILE] SUBCOMMAND [flags]

Subcommands: solve, bzero, benchmark, eta, verify, sweep. Flags take
precedence over the configuration file; see parsing.CONVERTERS for the
keys.

Exit status: 0 on success, 1 for configuration or I/O errors, 2 for
solver errors, 3 when a verification fails.
"""

import argparse
import csv
from concurrent.futures import ProcessPoolExecutor
import dataclasses
import logging
import math
import os
import sys
import time

import numpy

from . import __version__
from .artifacts import (
    description_hash,
    load_run,
    write_csv,
    write_json,
    write_reports,
    write_run,
    write_sweep,
    write_weights,
)
from .errors import ConfigError, SolverError
from .fbp import solve_b_zero, solve_fbp
from .formatting import format_number, render_table
from .fracops import Grid, build_weights
from .mbp import FluxSpec, InitialProfile, StefanProblem
from .mlf import AnalyticBenchmark, analytic_pair
from .parsing import CONVERTERS, parse_config, read_table
from .props import check_front_ordering, run_checks

logger = logging.getLogger(__name__)

__all__ = ["main", "run", "build_problem", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_VERIFY"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

# Keys that cannot be swept:
NOT_SWEEPABLE = ("subcommand", "output_dir", "runs", "sweep_key", "sweep_values", "workers")

# Refinement factors of the benchmark ladder (coarsest first):
LADDER = (4, 2, 1)


###############################################################################
# Problem construction


def build_problem(config, b=None):
    """
    StefanProblem described by config, with initial front b (config.b by
    default).
    """
    if config.h_kind == "constant":
        flux = FluxSpec.constant(config.h0)
    elif config.h_kind == "power":
        flux = FluxSpec.power_law(config.h0, config.h_power)
    else:
        flux = FluxSpec.table(*read_table(config.h_table))

    if config.u0 == "envelope":
        u0 = InitialProfile.envelope(config.u0_scale)
    elif config.u0 == "table":
        u0 = InitialProfile.table(*read_table(config.u0_table))
    else:
        u0 = InitialProfile.zero()

    return StefanProblem(
        alpha=config.alpha,
        flux=flux,
        b=config.b if b is None else b,
        u0=u0,
        horizon=config.T,
    )


def _discretization(config, n_cells=None):
    grid = Grid(config.n_cells if n_cells is None else n_cells)
    w = build_weights(config.alpha, grid)
    return grid, w


def _report(text):
    print(text)
    sys.stdout.flush()


###############################################################################
# Subcommands


def _solve(config):
    if not config.b > 0:
        raise ConfigError("solve needs b > 0 (use bzero for b = 0)", key="b")
    problem = build_problem(config)
    grid, w = _discretization(config)
    result = solve_fbp(problem, grid, w, config.dt, config.scheme, config.output_every)
    write_run(config.output_dir, result, config)
    if config.dump_weights:
        write_weights(config.output_dir, w)
    return "s_final=%.12g max_residual=%.3g" % (result.s_final, result.max_residual)


def _bzero(config):
    problem = build_problem(config, b=0.0)
    if not problem.u0.is_zero:
        raise ConfigError("bzero needs u0 = zero", key="u0")
    grid, w = _discretization(config)
    sweep = solve_b_zero(
        problem, config.m_list, grid, w, config.dt, config.scheme, config.output_every
    )
    write_sweep(config.output_dir, sweep, config)
    if config.dump_weights:
        write_weights(config.output_dir, w)
    max_residual = max(run.max_residual for run in sweep.runs)
    return "s_final=%.12g (+/- %.3g, order %.3g) max_residual=%.3g" % (
        sweep.front.s_values[-1],
        sweep.error[-1],
        sweep.order,
        max_residual,
    )


def _observed_order(coarse, fine, ratio=2.0):
    if coarse > 0 and fine > 0:
        return math.log(coarse / fine) / math.log(ratio)
    return math.nan


def _benchmark(config):
    """
    Restart the analytic solution at t0 and compare over a refinement
    ladder ending at (n_cells, dt).
    """
    if not config.t0 < config.T:
        raise ConfigError("t0 must lie in (0, T)", key="t0")
    bench = AnalyticBenchmark.from_parameters(config.alpha, config.h0, config.eta_tol)
    problem = StefanProblem(
        alpha=config.alpha,
        flux=FluxSpec.similarity(config.alpha, config.h0),
        b=float(bench.front(config.t0)),
        u0=InitialProfile.restart(bench, config.t0),
        horizon=config.T,
        t_start=config.t0,
    )

    rows = []
    max_residual = 0.0
    for factor in LADDER:
        n_cells = config.n_cells // factor
        dt = config.dt * factor
        grid, w = _discretization(config, n_cells)
        result = solve_fbp(problem, grid, w, dt, config.scheme, config.output_every)
        write_run(os.path.join(config.output_dir, "level_n%d" % n_cells), result, config)
        max_residual = max(max_residual, result.max_residual)

        exact_front = bench.front(result.front.times)
        front_error = float(
            numpy.max(numpy.abs(result.front.s_values - exact_front)) / numpy.max(exact_front)
        )
        u = result.solution.u_frames()[-1]
        exact_u, _ = analytic_pair(bench, result.solution.positions()[-1], config.T)
        u_error = float(numpy.max(numpy.abs(u - exact_u)) / numpy.max(numpy.abs(exact_u)))
        if rows:
            front_order = _observed_order(rows[-1][2], front_error)
            u_order = _observed_order(rows[-1][4], u_error)
        else:
            front_order = u_order = math.nan
        rows.append([n_cells, dt, front_error, front_order, u_error, u_order])
        logger.info("benchmark level n_cells=%d: front error %.3g", n_cells, front_error)

    header = ["n_cells", "dt", "front_error", "front_order", "u_error", "u_order"]
    write_csv(os.path.join(config.output_dir, "benchmark.csv"), header, rows)
    write_json(
        os.path.join(config.output_dir, "manifest.json"),
        {
            "schema": 1,
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "eta": bench.eta,
            "eta_residual": bench.residual(),
            "levels": ["level_n%d" % row[0] for row in rows],
        },
    )
    _report(render_table(header, rows))
    return "s_final=%.12g (exact %.12g) max_residual=%.3g" % (
        result.s_final,
        float(bench.front(config.T)),
        max_residual,
    )


def _eta(config):
    bench = AnalyticBenchmark.from_parameters(config.alpha, config.h0, config.eta_tol)
    values = [config.alpha, config.h0, bench.eta, bench.residual()]
    csv.writer(sys.stdout, lineterminator="\n").writerow([format_number(value) for value in values])
    sys.stdout.flush()
    return None


def _verify(config):
    if not config.runs:
        raise ConfigError("verify needs at least one run directory", key="runs")
    runs = [load_run(directory) for directory in config.runs]
    tolerances = config.tolerances()

    reports = []
    for directory, result in zip(config.runs, runs):
        for report in run_checks(result, tolerances, config.window_frac):
            reports.append(dataclasses.replace(report, detail=_joined(directory, report.detail)))
    if len(runs) > 1:
        reports.append(check_front_ordering(runs, tolerances["ordering"]))

    write_reports(os.path.join(config.output_dir, "reports.json"), reports)
    _report(
        render_table(
            ["check", "status", "worst", "tolerance", "detail"],
            [
                [r.name, r.status, r.worst_violation, r.tolerance, r.detail]
                for r in reports
            ],
        )
    )
    failed = [report.name for report in reports if report.status == "fail"]
    if failed:
        logger.error("verification failed: %s", ", ".join(failed))
    return failed


def _joined(directory, detail):
    return "%s: %s" % (directory, detail) if detail else directory


def _sweep_member(config):
    start = time.perf_counter()
    summary = _solve(config)
    logger.info("sweep member %s done in %.2f s", config.output_dir, time.perf_counter() - start)
    return summary


def _sweep(config):
    """
    Independent solves over sweep_values of sweep_key, in a process pool.
    """
    key = config.sweep_key
    if key is None or key not in CONVERTERS or key in NOT_SWEEPABLE:
        raise ConfigError("sweep_key must name a sweepable key, got %r" % (key,), key="sweep_key")
    if not config.sweep_values:
        raise ConfigError("sweep needs sweep_values", key="sweep_values")

    members = []
    for value in config.sweep_values:
        name = "%s=%s" % (key, value)
        members.append(
            (name, config.updated(**{key: value, "output_dir": os.path.join(config.output_dir, name)}))
        )

    workers = config.workers or os.cpu_count() or 1
    with ProcessPoolExecutor(max_workers=min(workers, len(members))) as pool:
        summaries = list(pool.map(_sweep_member, [member for _, member in members]))

    write_json(
        os.path.join(config.output_dir, "manifest.json"),
        {
            "schema": 1,
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "members": [
                {
                    "name": name,
                    "config_hash": member.config_hash(),
                    "summary": summary,
                }
                for (name, member), summary in zip(members, summaries)
            ],
            "members_hash": description_hash([member.config_hash() for _, member in members]),
        },
    )
    return "%d runs written to %s" % (len(members), config.output_dir)


SUBCOMMAND_RUNNERS = {
    "solve": _solve,
    "bzero": _bzero,
    "benchmark": _benchmark,
    "eta": _eta,
    "verify": _verify,
    "sweep": _sweep,
}


def run(config):
    """
    Execute the subcommand of config and return the exit status.

    Artifacts go to config.output_dir; a one-line summary (with the wall
    time) is printed for the solving subcommands.
    """
    start = time.perf_counter()
    try:
        outcome = SUBCOMMAND_RUNNERS[config.subcommand](config)
    except SolverError as exc:
        logger.error("solver error: %s", exc)
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - start

    if config.subcommand == "verify":
        return EXIT_VERIFY if outcome else EXIT_OK
    if outcome is not None:
        _report("%s wall=%.2fs" % (outcome, wall))
    return EXIT_OK


###############################################################################
# Argument parsing


def _problem_flags():
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("problem")
    group.add_argument("--alpha", help="order of the flux law, in (0,1)")
    group.add_argument("--h-kind", dest="h_kind", choices=("constant", "power", "table"))
    group.add_argument("--h0", help="flux amplitude")
    group.add_argument("--h-power", dest="h_power", help="flux exponent (power law)")
    group.add_argument("--h-table", dest="h_table", metavar="CSV", help="(t, h) table")
    group.add_argument("--b", help="initial front position")
    group.add_argument("--u0", choices=("zero", "table", "envelope"))
    group.add_argument("--u0-table", dest="u0_table", metavar="CSV", help="(x, u) table")
    group.add_argument("--u0-scale", dest="u0_scale", help="envelope fraction")
    group.add_argument("--T", dest="T", help="final time")
    group.add_argument("--t0", help="restart time of the benchmark")

    group = parser.add_argument_group("discretization")
    group.add_argument("--n", "--n-cells", dest="n_cells", help="number of cells")
    group.add_argument("--dt", help="time step")
    group.add_argument("--scheme", choices=("implicit", "imex"))
    group.add_argument("--output-every", dest="output_every", help="steps between frames")
    group.add_argument("--m", "--m-list", dest="m_list", help="comma-separated m (bzero)")
    group.add_argument("--eta-tol", dest="eta_tol", help="tolerance on H(eta) - eta")

    group = parser.add_argument_group("output")
    group.add_argument("-o", "--output-dir", dest="output_dir", help="artifact directory")
    group.add_argument(
        "--dump-weights",
        dest="dump_weights",
        action="store_const",
        const=True,
        help="also write the weight tables",
    )

    group = parser.add_argument_group("verification")
    for name in ("positivity", "envelope", "exponent", "velocity", "ordering"):
        group.add_argument("--tol-%s" % name, dest="tol_%s" % name, metavar="TOL")
    group.add_argument("--window-frac", dest="window_frac", help="boundary fit window")
    return parser


def make_parser():
    parser = argparse.ArgumentParser(
        prog="fracstefan",
        description="Space-fractional Stefan problem solver.",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v: info, -vv: debug")
    parser.add_argument("--config", metavar="FILE", help="key = value configuration file")

    common = [_problem_flags()]
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser("solve", parents=common, help="free-boundary solve")
    subparsers.add_parser("bzero", parents=common, help="zero initial domain (b -> 0)")
    subparsers.add_parser("benchmark", parents=common, help="comparison with the exact solution")
    subparsers.add_parser("eta", parents=common, help="front coefficient of the exact solution")
    verify = subparsers.add_parser("verify", parents=common, help="property checks on runs")
    verify.add_argument("runs", nargs="+", metavar="RUN_DIR")
    sweep = subparsers.add_parser("sweep", parents=common, help="parallel parameter sweep")
    sweep.add_argument("--key", dest="sweep_key", required=True, help="swept key")
    sweep.add_argument("--values", dest="sweep_values", required=True, help="comma-separated values")
    sweep.add_argument("--workers", help="worker processes (default: all cores)")
    return parser


def _configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package_logger = logging.getLogger("fracstefan")
    package_logger.addHandler(handler)
    package_logger.setLevel(level)
    return handler


def main(argv=None):
    args = make_parser().parse_args(argv)
    handler = _configure_logging(args.verbose)
    try:
        flags = {
            key: value
            for key, value in vars(args).items()
            if key not in ("verbose", "config")
        }
        try:
            config = parse_config(args.config, flags)
        except ConfigError as exc:
            print("error: %s" % exc, file=sys.stderr)
            return EXIT_CONFIG
        logger.info("configuration hash %s", config.config_hash())
        return run(config)
    finally:
        logging.getLogger("fracstefan").removeHandler(handler)
