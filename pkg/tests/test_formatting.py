import math

import numpy as np
import pytest

from fracstefan import formatting
from fracstefan.formatting import first_digit, format_number, format_short, render_table


@pytest.mark.parametrize(
    "value, position",
    [(0.5, -1), (123.0, 2), (1.0, 0), (9.99e-324, -324), (0.0, 0), (math.inf, 0), (math.nan, 0)],
)
def test_first_digit(value, position):
    assert first_digit(value) == position


def test_format_number():
    assert formatting.CSV_DIGITS == 17
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(0.5) == "0.5"
    assert format_number(3) == "3"
    assert format_number(np.float64(2.0)) == "2"
    assert formatting.CSV_FORMAT % 0.1 == format_number(0.1)

    # Every binary64 value is read back exactly:
    rng = np.random.default_rng(1234)
    for value in rng.standard_normal(200) * 10.0 ** rng.integers(-20, 20, 200):
        assert float(format_number(value)) == value


# (value, digits, expected)
short_cases = [
    (0.0123456, 4, "0.01235"),
    (123.456, 4, "123.5"),
    (123.456, 2, "123"),
    (1.5e-5, 4, "1.500e-05"),
    (2e6, 4, "2.000e+06"),
    (0.0, 4, "0.000"),
    (-0.25, 3, "-0.250"),
    (math.nan, 4, "nan"),
    ("pass", 4, "pass"),
    (64, 4, "64"),
]


@pytest.mark.parametrize("value, digits, expected", short_cases)
def test_format_short(value, digits, expected):
    assert format_short(value, digits) == expected


def test_render_table():
    table = render_table(["n", "error"], [[64, 0.0123456], [128, 3.2e-5]])
    lines = table.splitlines()
    assert len(lines) == 4
    assert lines[0].split() == ["n", "error"]
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2].split() == ["64", "0.01235"]
    assert lines[3].split() == ["128", "3.200e-05"]
    # Right-aligned columns:
    assert len({len(line) for line in lines}) == 1
