"""
No-carry numerals in base d/(d-1).

A DigitVector holds an advertiser's current-copy accumulator (or its bounded
per-arrival fraction) for the general-bids algorithm. Digits are raw
bid-to-budget ratios stored most-significant first, [b_t, ..., b_1, b_0], so
place r lives at index len(digits) - 1 - r. The common factor C/(d-1) is kept
in the parameters and only applied by value(). Nothing in this module ever
carries or borrows between places.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Tuple

from utils.rationals import format_rational
from .errors import NoOverflowError, NullDigitError, NumeralError, PlaceUnderflowError


@dataclass(frozen=True)
class DigitVector:
    """A base-d/(d-1) digit list with its numeral parameters"""
    digits: Tuple[Fraction, ...]
    d: int
    k: int
    scaling: Fraction

    def __post_init__(self):
        if self.d < 2:
            raise NumeralError(f"base d/(d-1) is undefined for d={self.d}")
        if self.k < 1:
            raise NumeralError(f"k must be at least 1, got {self.k}")
        digits = tuple(Fraction(digit) for digit in self.digits)
        if any(digit < 0 for digit in digits):
            raise NumeralError(f"negative digit in {digits}")
        object.__setattr__(self, 'digits', digits)
        object.__setattr__(self, 'scaling', Fraction(self.scaling))

    @classmethod
    def zero(cls, d: int, k: int, scaling: Fraction, places: int = None) -> 'DigitVector':
        """All-zero vector with `places` places (k by default)"""
        places = k if places is None else places
        return cls(tuple(Fraction(0) for _ in range(places)), d, k, scaling)

    @property
    def base(self) -> Fraction:
        return Fraction(self.d, self.d - 1)

    @property
    def places(self) -> int:
        return len(self.digits)

    def place(self, r: int) -> Fraction:
        """Digit at place r (zero beyond the stored length)"""
        if r < 0 or r >= len(self.digits):
            return Fraction(0)
        return self.digits[len(self.digits) - 1 - r]

    def non_null_count(self) -> int:
        return sum(1 for digit in self.digits if digit != 0)

    def digit_sum(self) -> Fraction:
        return sum(self.digits, Fraction(0))

    def max_digit(self) -> Fraction:
        return max(self.digits, default=Fraction(0))

    def with_digits(self, digits: Iterable[Fraction]) -> 'DigitVector':
        return DigitVector(tuple(digits), self.d, self.k, self.scaling)

    def value(self) -> Fraction:
        return value(self)

    def render(self) -> str:
        """Debug rendering used in trace files"""
        body = ",".join(format_rational(digit) for digit in self.digits)
        return f"[{body}] @ base {self.d}/{self.d - 1}, C={format_rational(self.scaling)}"

    def __str__(self) -> str:
        return self.render()


def _check_compatible(a: DigitVector, b: DigitVector):
    if (a.d, a.k, a.scaling) != (b.d, b.k, b.scaling):
        raise NumeralError("digit vectors have different numeral parameters")


def _aligned(a: DigitVector, b: DigitVector) -> Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]:
    width = max(a.places, b.places)
    pad_a = (Fraction(0),) * (width - a.places) + a.digits
    pad_b = (Fraction(0),) * (width - b.places) + b.digits
    return pad_a, pad_b


def value(v: DigitVector) -> Fraction:
    """(1/(d-1)) * C * sum_r b_r * (d/(d-1))^r, exactly"""
    base = v.base
    total = Fraction(0)
    for digit in v.digits:
        total = total * base + digit
    return total * v.scaling / (v.d - 1)


def place_add(a: DigitVector, b: DigitVector) -> DigitVector:
    """Digit-wise sum, shorter operand padded with leading zeros"""
    _check_compatible(a, b)
    pad_a, pad_b = _aligned(a, b)
    return a.with_digits(x + y for x, y in zip(pad_a, pad_b))


def place_sub(a: DigitVector, b: DigitVector) -> DigitVector:
    """Digit-wise difference; any negative place raises PlaceUnderflowError"""
    _check_compatible(a, b)
    pad_a, pad_b = _aligned(a, b)
    width = len(pad_a)
    result = []
    for index, (x, y) in enumerate(zip(pad_a, pad_b)):
        if y > x:
            raise PlaceUnderflowError(width - 1 - index)
        result.append(x - y)
    return a.with_digits(result)


def shift_append(v: DigitVector, b: Fraction) -> DigitVector:
    """Multiply by d/(d-1) and add C*b/(d-1): append b as the new place 0"""
    b = Fraction(b)
    if b < 0:
        raise NumeralError(f"appended digit must be nonnegative, got {b}")
    return v.with_digits(v.digits + (b,))


def truncate_fraction(v: DigitVector, cap: Fraction) -> DigitVector:
    """Replace every digit by min(digit, cap)"""
    cap = Fraction(cap)
    if cap < 0:
        raise NumeralError(f"cap must be nonnegative, got {cap}")
    return v.with_digits(min(digit, cap) for digit in v.digits)


def pop_overflow(v: DigitVector) -> Tuple[Fraction, DigitVector]:
    """Split a (k+1)-place vector into its place-k digit and the k-place rest"""
    if v.places != v.k + 1:
        raise NoOverflowError(f"expected {v.k + 1} places, found {v.places}")
    top = v.digits[0]
    if top == 0:
        raise NoOverflowError("place-k digit is null")
    return top, v.with_digits(v.digits[1:])


def trim_to(v: DigitVector, places: int) -> DigitVector:
    """Drop leading null places until at most `places` remain"""
    digits = v.digits
    while len(digits) > places:
        if digits[0] != 0:
            raise NumeralError(f"cannot drop non-null digit {digits[0]}")
        digits = digits[1:]
    return v.with_digits(digits)


def extract_common(v: DigitVector) -> Tuple[Fraction, DigitVector]:
    """Subtract the minimum digit from every place of a full k-place vector"""
    if v.places != v.k:
        raise NullDigitError(f"expected exactly {v.k} places, found {v.places}")
    if any(digit == 0 for digit in v.digits):
        raise NullDigitError("extract_common needs every digit non-null")
    common = min(v.digits)
    return common, v.with_digits(digit - common for digit in v.digits)


def digit_eq(a: DigitVector, b: DigitVector) -> bool:
    """Same digits after padding (zero-length and all-zero vectors agree)"""
    pad_a, pad_b = _aligned(a, b)
    return pad_a == pad_b and (a.d, a.k, a.scaling) == (b.d, b.k, b.scaling)


def value_eq(a: DigitVector, b: DigitVector) -> bool:
    return value(a) == value(b)
