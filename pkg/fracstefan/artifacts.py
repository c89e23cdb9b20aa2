"""
Run artifacts: CSV tables and JSON manifests.

A solve writes, in its output directory:

    front.csv      t, s, s_dot, residual, flux at the frame instants
    path.csv       t, s, s_dot at every step instant
    grid.csv       p, phi (the singular profile on the nodes)
    v_frames.csv   t, p_0..p_N (regular part at the frame instants)
    manifest.json  parameters, config hash, grid metadata and summary

Every file is written atomically (temporary file in the same directory,
then rename). Numbers use 17 significant digits, so that load_run()
rebuilds a run bit for bit.
"""

import csv
import hashlib
import json
import logging
import os
import tempfile

import numpy

from .fbp import FbpRun
from .formatting import CSV_FORMAT
from .fracops import Grid
from .mbp import FluxSpec, FrontPath, InitialProfile, SolutionField, StefanProblem
from .mlf import AnalyticBenchmark

logger = logging.getLogger(__name__)

__all__ = [
    "MANIFEST_SCHEMA",
    "atomic_write",
    "write_csv",
    "read_csv",
    "write_json",
    "description_hash",
    "write_run",
    "load_run",
    "write_sweep",
    "write_weights",
    "write_reports",
    "problem_from_description",
]

MANIFEST_SCHEMA = 1

RUN_FILES = ("front.csv", "path.csv", "grid.csv", "v_frames.csv", "manifest.json")


def atomic_write(path, content):
    """
    Write content to path through a temporary file and a rename.

    content is either text or a function called with the open text
    stream. OSError is raised with the path in its message.
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        descriptor, temporary = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        try:
            with os.fdopen(descriptor, "w", encoding="utf-8", newline="\n") as stream:
                if callable(content):
                    content(stream)
                else:
                    stream.write(content)
            os.replace(temporary, path)
        except BaseException:
            os.unlink(temporary)
            raise
    except OSError as exc:
        raise OSError("cannot write %s: %s" % (path, exc.strerror or exc)) from exc
    logger.debug("wrote %s", path)
    return path


def _savetxt(path, table, header=None):
    def dump(stream):
        numpy.savetxt(
            stream,
            table,
            fmt=CSV_FORMAT,
            delimiter=",",
            header="" if header is None else ",".join(header),
            comments="",
        )

    return atomic_write(path, dump)


def write_csv(path, header, rows):
    table = numpy.array(list(rows), dtype=float).reshape(-1, len(header))
    return _savetxt(path, table, header)


def read_csv(path):
    """
    Return (header, float array of the rows) of a CSV artifact.
    """
    try:
        with open(path, encoding="utf-8", newline="") as stream:
            header = next(csv.reader(stream), None)
            if not header:
                raise ValueError("%s: empty CSV document" % path)
            try:
                rows = numpy.loadtxt(stream, delimiter=",", ndmin=2)
            except ValueError as exc:
                raise ValueError("%s: %s" % (path, exc)) from None
    except OSError as exc:
        raise OSError("cannot read %s: %s" % (path, exc.strerror or exc)) from exc
    if rows.size == 0:
        rows = rows.reshape(0, len(header))
    elif rows.shape[1] != len(header):
        raise ValueError(
            "%s: %d columns, %d expected from the header" % (path, rows.shape[1], len(header))
        )
    return header, rows


def write_json(path, data):
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as stream:
            return json.load(stream)
    except OSError as exc:
        raise OSError("cannot read %s: %s" % (path, exc.strerror or exc)) from exc


def description_hash(data):
    """
    SHA-256 of the canonical JSON form of data.
    """
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _config_fields(run, config):
    if config is not None:
        return config.to_dict(), config.config_hash()
    description = {
        "problem": run.problem.describe(),
        "n_cells": run.solution.grid.n_cells,
        "dt": run.dt,
        "scheme": run.scheme,
        "mode": run.mode,
    }
    return None, description_hash(description)


def write_run(directory, run, config=None):
    """
    Write the artifacts of an FbpRun to directory. Returns the manifest.
    """
    solution = run.solution
    grid = solution.grid
    front = solution.front
    write_csv(
        os.path.join(directory, "front.csv"),
        ["t", "s", "s_dot", "residual", "flux"],
        zip(solution.times, front.s_values, front.s_dots, run.residuals, solution.fluxes),
    )
    write_csv(
        os.path.join(directory, "path.csv"),
        ["t", "s", "s_dot"],
        zip(run.front.times, run.front.s_values, run.front.s_dots),
    )
    write_csv(os.path.join(directory, "grid.csv"), ["p", "phi"], zip(grid.nodes, solution.phi))
    write_csv(
        os.path.join(directory, "v_frames.csv"),
        ["t"] + ["p_%d" % i for i in range(grid.n_cells + 1)],
        (numpy.concatenate(([t], v)) for t, v in zip(solution.times, solution.v_frames)),
    )

    config_data, config_hash = _config_fields(run, config)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "config": config_data,
        "config_hash": config_hash,
        "problem": run.problem.describe(),
        "grid": {"n_cells": grid.n_cells, "spacing": grid.spacing},
        "M": run.M,
        "history": list(run.history),
        "summary": run.summary(),
        "files": list(RUN_FILES),
    }
    write_json(os.path.join(directory, "manifest.json"), manifest)
    logger.info("run artifacts written to %s", directory)
    return manifest


def problem_from_description(description):
    """
    Rebuild a StefanProblem from its describe() dictionary.
    """
    h_spec = description["h_spec"]
    kind = h_spec["kind"]
    if kind == "constant":
        flux = FluxSpec.constant(h_spec["h0"])
    elif kind == "power":
        flux = FluxSpec.power_law(h_spec["h0"], h_spec["power"])
    else:
        flux = FluxSpec.table(h_spec["times"], h_spec["values"])

    u0_spec = description["u0_spec"]
    kind = u0_spec["kind"]
    if kind == "envelope":
        u0 = InitialProfile.envelope(u0_spec["scale"])
    elif kind == "table":
        u0 = InitialProfile.table(u0_spec["x"], u0_spec["u"])
    elif kind == "benchmark":
        bench = AnalyticBenchmark(u0_spec["alpha"], u0_spec["h0"], u0_spec["eta"])
        u0 = InitialProfile.restart(bench, u0_spec["t0"])
    else:
        u0 = InitialProfile.zero()

    return StefanProblem(
        alpha=description["alpha"],
        flux=flux,
        b=description["b"],
        u0=u0,
        horizon=description["horizon"],
        t_start=description["t_start"],
    )


def load_run(directory):
    """
    Rebuild the FbpRun written by write_run() to directory.
    """
    manifest = _read_json(os.path.join(directory, "manifest.json"))
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(
            "%s: unsupported manifest schema %r" % (directory, manifest.get("schema"))
        )
    problem = problem_from_description(manifest["problem"])
    grid = Grid(manifest["grid"]["n_cells"])
    summary = manifest["summary"]

    _, front_rows = read_csv(os.path.join(directory, "front.csv"))
    _, path_rows = read_csv(os.path.join(directory, "path.csv"))
    _, grid_rows = read_csv(os.path.join(directory, "grid.csv"))
    _, frame_rows = read_csv(os.path.join(directory, "v_frames.csv"))
    if frame_rows.shape[1] != grid.n_cells + 2 or len(grid_rows) != grid.n_cells + 1:
        raise ValueError("%s: frames do not match the grid" % directory)

    times = front_rows[:, 0]
    solution = SolutionField(
        times=times,
        v_frames=frame_rows[:, 1:],
        front=FrontPath(times, front_rows[:, 1], front_rows[:, 2]),
        fluxes=front_rows[:, 4],
        alpha=problem.alpha,
        grid=grid,
        phi=grid_rows[:, 1],
    )
    return FbpRun(
        problem=problem,
        solution=solution,
        front=FrontPath(path_rows[:, 0], path_rows[:, 1], path_rows[:, 2]),
        mode=summary["mode"],
        M=manifest["M"],
        dt=summary["dt"],
        scheme=summary["scheme"],
        residuals=front_rows[:, 3],
        clamp_violation=summary["clamp_violation"],
        overshoot=summary["overshoot"],
        iterations=summary["iterations"],
        history=tuple(manifest["history"]),
    )


def write_sweep(directory, sweep, config=None):
    """
    Write a b -> 0 sweep: one run directory per member (member_m<m>),
    the nested fronts and the extrapolation in fronts.csv, and a
    manifest aggregating the members.
    """
    members = []
    for m, run in zip(sweep.m_list, sweep.runs):
        name = "member_m%d" % m
        write_run(os.path.join(directory, name), run, config)
        members.append(name)

    header = ["t"] + ["s_m%d" % m for m in sweep.m_list] + ["s_extrapolated", "error"]
    columns = [sweep.front.times]
    columns.extend(run.solution.front.s_values for run in sweep.runs)
    columns.extend([sweep.front.s_values, sweep.error])
    if sweep.sensitivity is not None:
        header.append("sensitivity")
        columns.append(sweep.sensitivity)
    write_csv(os.path.join(directory, "fronts.csv"), header, numpy.column_stack(columns))

    config_data = None if config is None else config.to_dict()
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "config": config_data,
        "config_hash": (
            config.config_hash() if config is not None else description_hash(sweep.summary())
        ),
        "summary": sweep.summary(),
        "members": members,
    }
    write_json(os.path.join(directory, "manifest.json"), manifest)
    return manifest


def write_weights(directory, w):
    """
    Dump the weight tables of w, row-major, one CSV file per table.
    """
    tables = {
        "weights_integral.csv": w.integral_weights,
        "weights_rl.csv": w.rl_weights,
        "weights_flux.csv": w.flux_weights,
        "weights_divergence.csv": w.divergence_weights,
    }
    paths = []
    for name, table in tables.items():
        paths.append(_savetxt(os.path.join(directory, name), numpy.atleast_2d(table)))
    return paths


def write_reports(path, reports):
    """
    JSON array of PropertyReport dictionaries.
    """
    return write_json(path, [report.to_dict() for report in reports])
