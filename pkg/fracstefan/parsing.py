"""
Parsing of run configurations.

A configuration file is flat structured text: one "key = value" per
line, "#" starting a comment, and an explicit schema version:

    schema = 1
    alpha = 0.5
    h_kind = constant
    h0 = 1
    b = 0.25
    T = 1
    n_cells = 128
    dt = 1e-3

Values from the file are overridden by the environment (output
directory only) and then by command-line flags.
"""

import csv
from dataclasses import asdict, dataclass, fields
import hashlib
import json
import os
import re

import numpy

from .errors import ConfigError

__all__ = [
    "SCHEMA_VERSION",
    "OUTPUT_DIR_ENV",
    "RunConfig",
    "parse_config",
    "read_table",
]

SCHEMA_VERSION = 1

# Environment variable overriding the output directory:
OUTPUT_DIR_ENV = "FRACSTEFAN_OUTPUT_DIR"

SUBCOMMANDS = ("solve", "bzero", "benchmark", "eta", "verify", "sweep")

KEY_VALUE_RE_MATCH = re.compile(
    r"""
    \s*
    (?P<key>[A-Za-z_][A-Za-z0-9_]*)  # Key
    \s*=\s*
    (?P<value>.*?)  # Value, possibly empty
    \s*$""",
    re.VERBOSE,
).match


def _choice(*choices):
    def convert(text):
        if text not in choices:
            raise ValueError("expected one of %s" % ", ".join(choices))
        return text

    return convert


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(item) for item in text)
    return tuple(int(item) for item in str(text).split(",") if item.strip())


def _str_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(str(item) for item in text)
    return tuple(item.strip() for item in str(text).split(",") if item.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _optional_str(text):
    return None if text in (None, "") else str(text)


# Converters, by key:
CONVERTERS = {
    "subcommand": _choice(*SUBCOMMANDS),
    "alpha": float,
    "h_kind": _choice("constant", "power", "table"),
    "h0": float,
    "h_power": float,
    "h_table": _optional_str,
    "b": float,
    "u0": _choice("zero", "table", "envelope"),
    "u0_table": _optional_str,
    "u0_scale": float,
    "T": float,
    "n_cells": int,
    "dt": float,
    "t0": float,
    "scheme": _choice("implicit", "imex"),
    "output_every": int,
    "output_dir": str,
    "m_list": _int_list,
    "workers": int,
    "eta_tol": float,
    "tol_positivity": float,
    "tol_envelope": float,
    "tol_exponent": float,
    "tol_velocity": float,
    "tol_ordering": float,
    "window_frac": float,
    "runs": _str_list,
    "sweep_key": _optional_str,
    "sweep_values": _str_list,
    "dump_weights": _bool,
}


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration. See CONVERTERS for the accepted keys.
    """

    subcommand: str = "solve"
    alpha: float = 0.5
    h_kind: str = "constant"
    h0: float = 1.0
    h_power: float = 0.0
    h_table: str = None
    b: float = 0.25
    u0: str = "zero"
    u0_table: str = None
    u0_scale: float = 1.0
    T: float = 1.0
    n_cells: int = 128
    dt: float = 1e-3
    t0: float = 0.1
    scheme: str = "implicit"
    output_every: int = 10
    output_dir: str = "fracstefan-output"
    m_list: tuple = (4, 8, 16, 32)
    workers: int = 0
    eta_tol: float = 1e-10
    tol_positivity: float = 1e-8
    tol_envelope: float = 1e-6
    tol_exponent: float = 0.02
    tol_velocity: float = 1e-8
    tol_ordering: float = 1e-6
    window_frac: float = 0.05
    runs: tuple = ()
    sweep_key: str = None
    sweep_values: tuple = ()
    dump_weights: bool = False

    def tolerances(self):
        return {
            "positivity": self.tol_positivity,
            "envelope": self.tol_envelope,
            "exponent": self.tol_exponent,
            "velocity": self.tol_velocity,
            "ordering": self.tol_ordering,
        }

    def to_dict(self):
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    def config_hash(self):
        """
        SHA-256 of the canonical JSON form, output directory excluded.
        """
        data = self.to_dict()
        del data["output_dir"]
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def updated(self, **changes):
        """
        Copy with string or typed values converted and revalidated.
        """
        data = asdict(self)
        for key, value in changes.items():
            data[key] = _convert(key, value)
        return _validated(RunConfig(**data))


def _convert(key, value, line=None):
    try:
        converter = CONVERTERS[key]
    except KeyError:
        raise ConfigError("unknown key %r" % key, line=line, key=key) from None
    try:
        return converter(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            "invalid value %r for %s: %s" % (value, key, exc), line=line, key=key
        ) from None


def read_table(path):
    """
    Return the two columns of a numeric CSV table as float arrays.

    Blank lines, "#" comments and a non-numeric header line are skipped.
    """
    rows = []
    try:
        with open(path, encoding="utf-8", newline="") as table:
            reader = csv.reader((line.partition("#")[0] for line in table), skipinitialspace=True)
            for record in reader:
                if not any(item.strip() for item in record):
                    continue
                try:
                    values = [float(item) for item in record]
                except ValueError:
                    if not rows:
                        continue  # Header
                    raise ConfigError("%s: non-numeric row" % path, line=reader.line_num) from None
                if len(values) != 2:
                    raise ConfigError("%s: two columns expected" % path, line=reader.line_num)
                rows.append(values)
    except OSError as exc:
        raise ConfigError("cannot read table %s: %s" % (path, exc)) from exc
    if len(rows) < 2:
        raise ConfigError("%s: at least two rows expected" % path)
    table = numpy.array(rows)
    return table[:, 0], table[:, 1]


def _validated(config):
    def fail(msg, key):
        raise ConfigError(msg, key=key)

    if not 0 < config.alpha < 1:
        fail("alpha must lie in (0,1)", "alpha")
    if not config.T > 0:
        fail("T must be positive", "T")
    if config.n_cells < 16:
        fail("n_cells must be >= 16", "n_cells")
    if not config.dt > 0:
        fail("dt must be positive", "dt")
    if not config.b >= 0:
        fail("b must be >= 0", "b")
    if not config.h0 >= 0:
        fail("h0 must be >= 0: the boundary flux satisfies h(t) >= 0", "h0")
    if config.h_kind == "power" and not config.h_power > -1:
        fail("h_power must be > -1", "h_power")
    if config.h_kind == "table":
        if config.h_table is None:
            fail("h_kind = table needs h_table", "h_table")
        times, values = read_table(config.h_table)
        if numpy.any(values < 0):
            fail(
                "h table entry h(%g) = %g is negative: the boundary flux must"
                " satisfy h(t) >= 0" % (times[values < 0][0], values[values < 0][0]),
                "h_table",
            )
    if config.u0 == "table" and config.u0_table is None:
        fail("u0 = table needs u0_table", "u0_table")
    if not config.u0_scale >= 0:
        fail("u0_scale must be >= 0", "u0_scale")
    if not 0 < config.t0 < config.T:
        if config.subcommand == "benchmark":
            fail("t0 must lie in (0, T)", "t0")
    if config.output_every < 1:
        fail("output_every must be >= 1", "output_every")
    if list(config.m_list) != sorted(set(config.m_list)) or any(m < 1 for m in config.m_list):
        fail("m_list must hold increasing positive integers", "m_list")
    if config.workers < 0:
        fail("workers must be >= 0", "workers")
    if not 0 < config.window_frac < 1:
        fail("window_frac must lie in (0,1)", "window_frac")
    return config


def parse_config(path=None, flags=None, environ=None):
    """
    Return the RunConfig read from the file at path (if any), the
    environment and flags.

    flags -- mapping from keys to values; None values are ignored.
    environ -- mapping used instead of os.environ.

    ConfigError is raised for unknown keys, malformed lines and values
    violating the configuration invariants.
    """
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as config_file:
                lines = config_file.read().splitlines()
        except OSError as exc:
            raise ConfigError("cannot read configuration %s: %s" % (path, exc)) from exc

        schema = None
        for number, line in enumerate(lines, start=1):
            content = line.split("#", 1)[0]
            if not content.strip():
                continue
            match = KEY_VALUE_RE_MATCH(content)
            if match is None:
                raise ConfigError("expected 'key = value', got %r" % line.strip(), line=number)
            key, value = match.group("key"), match.group("value")
            if key == "schema":
                schema = value
                continue
            if key in values:
                raise ConfigError("duplicate key %r" % key, line=number, key=key)
            values[key] = _convert(key, value, number)
        if schema != str(SCHEMA_VERSION):
            raise ConfigError(
                "unsupported or missing schema version %r (expected %d)"
                % (schema, SCHEMA_VERSION),
                key="schema",
            )

    environ = os.environ if environ is None else environ
    if environ.get(OUTPUT_DIR_ENV):
        values["output_dir"] = environ[OUTPUT_DIR_ENV]

    for key, value in (flags or {}).items():
        if value is not None:
            values[key] = _convert(key, value)

    unknown = sorted(set(values) - {f.name for f in fields(RunConfig)})
    if unknown:
        raise ConfigError("unknown key %r" % unknown[0], key=unknown[0])
    return _validated(RunConfig(**values))
