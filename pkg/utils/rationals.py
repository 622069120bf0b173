"""
Exact rational helpers.

Every money and dual quantity in the toolkit is a fractions.Fraction. Files
carry them as decimal-free "p/q" strings so they survive a round trip bit for
bit.
"""

import re
from fractions import Fraction
from typing import Union

RationalLike = Union[Fraction, int, str]

_RATIONAL_PATTERN = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+))?\s*$")


def parse_rational(text: RationalLike) -> Fraction:
    """
    Parse a "p/q" (or plain integer) string into a Fraction.

    Args:
        text: "p/q", "p", an int or a Fraction

    Returns:
        The exact value

    Raises:
        ValueError: If the text is not a decimal-free rational
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"not a rational: {text!r}")

    match = _RATIONAL_PATTERN.match(text)
    if not match:
        raise ValueError(f"not a decimal-free rational: {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) else 1
    if denominator == 0:
        raise ValueError(f"zero denominator: {text!r}")
    return Fraction(numerator, denominator)


def format_rational(value: RationalLike) -> str:
    """Render a rational as "p/q" ("p" when the denominator is one)"""
    value = parse_rational(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def ceil_fraction(value: Fraction) -> int:
    """Exact ceiling of a rational"""
    return -((-value.numerator) // value.denominator)


def is_unit_fraction(value: Fraction) -> bool:
    """True for 1/m with m a positive integer"""
    return value > 0 and value.numerator == 1
