#!/usr/bin/env python3
"""
Test script for the no-carry digit vectors used by the general-bids algorithm.
"""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import (
    DigitVector, NumeralError, PlaceUnderflowError, NoOverflowError, NullDigitError,
    value, place_add, place_sub, shift_append, truncate_fraction, pop_overflow,
    extract_common, trim_to, digit_eq, value_eq
)

F = Fraction


def vec(*digits, d=2, k=3, scaling=F(1)):
    return DigitVector(tuple(F(digit) for digit in digits), d, k, scaling)


def test_value_is_exact():
    """value() weights place r by (d/(d-1))^r and applies C/(d-1)"""
    print("Testing digit vector values...")

    # base 2, C = 1: [1, 0, 1] = 4 + 1
    assert value(vec(1, 0, 1)) == 5
    # base 4/3, d-1 = 3, C = 1/3: [1, 1] = (4/3 + 1) / 9
    assert value(vec(1, 1, d=4, scaling=F(1, 3))) == F(7, 27)
    assert vec().value() == 0
    assert vec(F(1, 2)).place(0) == F(1, 2)
    assert vec(F(1, 2)).place(5) == 0

    print("[OK] Values are exact")


def test_construction_rejects_bad_parameters():
    print("Testing numeral parameter checks...")

    with pytest.raises(NumeralError):
        vec(1, d=1)
    with pytest.raises(NumeralError):
        vec(1, k=0)
    with pytest.raises(NumeralError):
        vec(-1)

    print("[OK] Bad parameters rejected")


def test_placewise_arithmetic_never_carries():
    print("Testing placewise add and subtract...")

    total = place_add(vec(1, 1), vec(1))
    assert total.digits == (F(1), F(2))
    assert value(total) == value(vec(1, 1)) + value(vec(1))

    difference = place_sub(vec(2, 1, 1), vec(1, 0, 1))
    assert difference.digits == (F(1), F(1), F(0))

    with pytest.raises(PlaceUnderflowError) as excinfo:
        place_sub(vec(1, 0), vec(0, 1))
    assert excinfo.value.place == 0

    with pytest.raises(NumeralError):
        place_add(vec(1), vec(1, d=3))

    print("[OK] No carries or borrows")


def test_shift_append_multiplies_by_the_base():
    print("Testing shift_append...")

    v = vec(1, F(1, 2), d=3, scaling=F(2, 5))
    shifted = shift_append(v, F(1, 4))
    assert shifted.digits == (F(1), F(1, 2), F(1, 4))
    assert value(shifted) == value(v) * F(3, 2) + F(2, 5) * F(1, 4) / 2

    with pytest.raises(NumeralError):
        shift_append(v, F(-1))

    print("[OK] shift_append is exact")


def test_truncate_and_trim():
    print("Testing truncate_fraction and trim_to...")

    truncated = truncate_fraction(vec(F(3, 4), F(1, 8), F(1, 2)), F(1, 2))
    assert truncated.digits == (F(1, 2), F(1, 8), F(1, 2))

    assert trim_to(vec(0, 0, 1, 1), 2).digits == (F(1), F(1))
    with pytest.raises(NumeralError):
        trim_to(vec(1, 0, 1), 2)

    print("[OK] Truncation and trimming behave")


def test_overflow_and_common_extraction():
    print("Testing pop_overflow and extract_common...")

    top, rest = pop_overflow(vec(F(1, 3), 0, F(1, 2), F(1, 4)))
    assert top == F(1, 3)
    assert rest.digits == (F(0), F(1, 2), F(1, 4))

    with pytest.raises(NoOverflowError):
        pop_overflow(vec(0, 1, 1, 1))
    with pytest.raises(NoOverflowError):
        pop_overflow(vec(1, 1, 1))

    common, rest = extract_common(vec(F(1, 2), F(1, 4), F(3, 4)))
    assert common == F(1, 4)
    assert rest.digits == (F(1, 4), F(0), F(1, 2))

    with pytest.raises(NullDigitError):
        extract_common(vec(1, 0, 1))
    with pytest.raises(NullDigitError):
        extract_common(vec(1, 1))

    print("[OK] Normalization primitives behave")


def test_equality_modes():
    print("Testing digit and value equality...")

    empty = vec()
    zero = DigitVector.zero(2, 3, F(1))
    assert digit_eq(empty, zero)
    assert value_eq(empty, zero)

    # base 2: [1, 0] and [0, 2] share a value but not their digits
    assert value_eq(vec(1, 0), vec(0, 2))
    assert not digit_eq(vec(1, 0), vec(0, 2))

    print("[OK] Equality modes differ where they should")


def random_vector(rng, places, d, k, scaling):
    return DigitVector(tuple(F(int(digit), 8) for digit in rng.integers(0, 9, size=places)), d, k, scaling)


@pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (4, 5)])
def test_numeral_identities_on_random_vectors(d, k):
    print(f"Testing numeral identities for d={d}, k={k}...")

    rng = np.random.default_rng(np.random.SeedSequence([d, k]))
    scaling = 1 / (F(d, d - 1) ** k - 1)
    base = F(d, d - 1)
    for _ in range(200):
        a = random_vector(rng, int(rng.integers(0, k + 2)), d, k, scaling)
        b = random_vector(rng, int(rng.integers(0, k + 2)), d, k, scaling)
        assert value(place_add(a, b)) == value(a) + value(b)

        # a sub-vector of a, digit by digit
        part = a.with_digits(digit * F(int(rng.integers(0, 5)), 4) for digit in a.digits)
        assert value(place_sub(a, part)) == value(a) - value(part)

        appended = F(int(rng.integers(0, 9)), 8)
        assert value(shift_append(a, appended)) == base * value(a) + scaling * appended / (d - 1)

        full = random_vector(rng, k + 1, d, k, scaling)
        if full.digits[0] == 0:
            continue
        top, rest = pop_overflow(full)
        assert value(full) - value(rest) >= top / k

    print("[OK] Linearity, shift_append and the overflow drop hold")


if __name__ == "__main__":
    try:
        test_value_is_exact()
        test_construction_rejects_bad_parameters()
        test_placewise_arithmetic_never_carries()
        test_shift_append_multiplies_by_the_base()
        test_truncate_and_trim()
        test_overflow_and_common_extraction()
        test_equality_modes()
        for d, k in [(2, 2), (3, 2), (4, 5)]:
            test_numeral_identities_on_random_vectors(d, k)
        print("\n[SUCCESS] All digit vector tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Digit vector test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
