"""
Number formatting for artifacts and terminal output.

CSV artifacts use 17 significant digits, so that every binary64 value
is read back exactly; tables printed for humans use a short form.
"""

import math

__all__ = [
    "CSV_DIGITS",
    "CSV_FORMAT",
    "first_digit",
    "format_number",
    "format_short",
    "render_table",
]

# Significant digits that round-trip any binary64 value:
CSV_DIGITS = 17

# numpy.savetxt() format of CSV artifacts:
CSV_FORMAT = "%%.%dg" % CSV_DIGITS


def first_digit(value):
    """
    Return the first digit position of the given value, as an integer.

    0 is the digit just before the decimal point. Digits to the right
    of the decimal point have a negative position.

    Return 0 for a null or non-finite value.
    """
    try:
        return int(math.floor(math.log10(abs(value))))
    except (ValueError, OverflowError):  # 0, nan or inf
        return 0


def format_number(value):
    """
    Representation of value with CSV_DIGITS significant digits ('.'
    decimal separator, no locale).
    """
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".%dg" % CSV_DIGITS)


def format_short(value, digits=4):
    """
    Short human-readable representation: fixed point for moderate
    magnitudes, exponent notation otherwise.
    """
    if isinstance(value, (str, int)):
        return str(value)
    value = float(value)
    if not math.isfinite(value):
        return str(value)
    exponent = first_digit(value)
    if value != 0 and not -3 <= exponent < 6:
        return "%.*e" % (digits - 1, value)
    return "%.*f" % (max(digits - 1 - exponent, 0), value)


def render_table(headers, rows, digits=4):
    """
    Plain-text table with right-aligned columns.
    """
    cells = [list(headers)] + [[format_short(value, digits) for value in row] for row in rows]
    widths = [max(len(row[column]) for row in cells) for column in range(len(headers))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)
